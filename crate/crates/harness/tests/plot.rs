use std::fs;
use std::path::Path;

use csi_ppp_harness::experiment::{RESULTS_HEADER, TRACES_HEADER};
use csi_ppp_harness::plot::{embedded_series, plot_results, read_results};
use csi_ppp_harness::HarnessError;

const RESULTS: &str = "\
ppp-soft,0.25,none,-10.5,0.96,0.95,3.35,6.54,8
ppp-soft,0.125,none,-3.4,0.74,0.64,2.67,5.75,8
ppp-soft,0.25,3,-6.8,0.89,0.84,3.15,6.31,8
omp,0.0625,none,-1.2,0.50,0.31,1.90,4.80,8
omp,0.25,none,-inf,1.00,0.99,3.44,6.64,8
omp,0.125,none,-4.0,0.82,0.74,2.88,5.98,8
";

fn write(dir: &Path, name: &str, header: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, format!("{header}\n{body}")).unwrap();
    p
}

fn markers(svg: &str) -> usize {
    svg.matches(r#"class="marker""#).count()
}

#[test]
fn rendered_series_match_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let results = write(dir.path(), "results.csv", RESULTS_HEADER, RESULTS);
    let summary = plot_results(&results, None, dir.path()).unwrap();
    assert!(summary.warnings.is_empty());
    assert_eq!(summary.files.len(), 3);

    let rows = read_results(&results).unwrap();
    for (db, col) in [(0, 0), (10, 1), (20, 2)] {
        let svg = fs::read_to_string(dir.path().join(format!("rate_vs_cr_{db}db.svg"))).unwrap();
        let series = embedded_series(&svg).unwrap();
        assert_eq!(series.len(), 3);
        let mut points = 0;
        for row in &rows {
            let label = if row.bits == "none" { row.method.clone() } else { format!("{}, B={}", row.method, row.bits) };
            let s = series.iter().find(|s| s.label == label).unwrap();
            let i = s.x.iter().position(|&x| x == row.cr).unwrap();
            assert_eq!(s.y[i], [row.rate_0db, row.rate_10db, row.rate_20db][col]);
            points += 1;
        }
        assert_eq!(points, series.iter().map(|s| s.x.len()).sum::<usize>());
        // x ascending within each curve
        assert!(series.iter().all(|s| s.x.windows(2).all(|w| w[0] < w[1])));
        assert_eq!(markers(&svg), 6);
    }
}

#[test]
fn convergence_averages_linear_nmse() {
    let dir = tempfile::tempdir().unwrap();
    let results = write(dir.path(), "results.csv", RESULTS_HEADER, RESULTS);
    let traces = write(
        dir.path(),
        "traces.csv",
        TRACES_HEADER,
        "ppp-soft,0.25,none,0,1,1e-2,0.1,0.5,-10\n\
         ppp-soft,0.25,none,1,1,1e-2,0.1,0.5,-20\n\
         ppp-soft,0.25,none,0,2,1.8e-2,0.07,0.4,-20\n\
         ppp-soft,0.25,none,1,2,1.8e-2,0.07,0.4,-20\n\
         ppp-soft,0.125,3,0,1,1e-2,0.1,0.5,\n",
    );
    plot_results(&results, Some(&traces), dir.path()).unwrap();
    let svg = fs::read_to_string(dir.path().join("convergence.svg")).unwrap();
    let series = embedded_series(&svg).unwrap();
    let s = series.iter().find(|s| s.label == "ppp-soft, CR=1/4").unwrap();
    assert_eq!(s.x, vec![1.0, 2.0]);
    // mean of 0.1 and 0.01 is 0.055
    assert!((s.y[0] - 10.0 * 0.055f64.log10()).abs() < 1e-12);
    assert!((s.y[1] + 20.0).abs() < 1e-12);
    assert!(series.iter().all(|s| !s.label.contains("1/8")));
}

#[test]
fn empty_results_warn_but_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let results = write(dir.path(), "results.csv", RESULTS_HEADER, "");
    let summary = plot_results(&results, None, dir.path()).unwrap();
    assert_eq!(summary.warnings.len(), 1);
    for f in &summary.files {
        let svg = fs::read_to_string(f).unwrap();
        assert!(svg.contains("no data"));
        assert_eq!(markers(&svg), 0);
    }
}

#[test]
fn single_point_gives_single_marker() {
    let dir = tempfile::tempdir().unwrap();
    let results = write(dir.path(), "results.csv", RESULTS_HEADER, "omp,0.25,none,-5,0.9,1.0,2.0,3.0,1\n");
    plot_results(&results, None, dir.path()).unwrap();
    let svg = fs::read_to_string(dir.path().join("rate_vs_cr_20db.svg")).unwrap();
    assert_eq!(markers(&svg), 1);
    assert!(!svg.contains("<polyline"));
    assert_eq!(embedded_series(&svg).unwrap()[0].y, vec![3.0]);
}

#[test]
fn malformed_csv_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "a.csv", RESULTS_HEADER, "omp,0.25,none,-5,0.9,1,2,3,1\nomp,0.125,none,oops,0.9,1,2,3,1\n");
    match plot_results(&bad, None, dir.path()) {
        Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let short = write(dir.path(), "b.csv", RESULTS_HEADER, "omp,0.25,none\n");
    assert!(matches!(plot_results(&short, None, dir.path()), Err(HarnessError::Parse { line: 2, .. })));
    let header = write(dir.path(), "c.csv", "method,cr", "omp,0.25\n");
    let err = plot_results(&header, None, dir.path()).unwrap_err();
    assert!(matches!(err, HarnessError::Parse { line: 1, .. }));
    assert_eq!(err.exit_code(), 2);
}
