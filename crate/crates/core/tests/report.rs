use std::path::PathBuf;

use llmhar_core::experiment::cmd_report;
use llmhar_core::report::{ablation_chart, size_sweep_chart, ReferenceLine};
use llmhar_core::score::{aggregate, format_mean_std, mean_std, DatasetReport, ReportInfo, SessionMetrics};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/size_sweep_reports.json")
}

fn session(missed: f64) -> SessionMetrics {
    SessionMetrics {
        session_id: format!("s{missed}"),
        n_events: 10,
        n_correct: 10 - missed as u64 / 10,
        n_wrong: 0,
        n_missed: missed as u64 / 10,
        f1_macro: 0.5,
        f1_micro: 0.5,
        missed_pct: missed,
        per_label_counts: Default::default(),
    }
}

#[test]
fn population_std_rendering() {
    let r = aggregate(vec![session(10.0), session(20.0), session(30.0)], ReportInfo::default()).unwrap();
    assert_eq!(r.missed_display, "20.00 ± 8.16");
    assert_eq!(format_mean_std(0.0, 0.0), "0.00 ± 0.00");
    assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
}

#[test]
fn size_sweep_from_published_style_values() {
    let reports: Vec<DatasetReport> =
        serde_json::from_str(&std::fs::read_to_string(fixture()).unwrap()).unwrap();
    let chart = size_sweep_chart(&reports).unwrap();
    assert_eq!(chart.series.len(), 2);
    for s in &chart.series {
        assert_eq!(s.points.len(), 6, "{}", s.name);
        let xs: Vec<f64> = s.points.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.6, 1.7, 4.0, 8.0, 14.0, 32.0]);
    }
    let marble: Vec<DatasetReport> = reports.into_iter().filter(|r| r.info.dataset == "Marble").collect();
    let svg = size_sweep_chart(&marble).unwrap().to_svg();
    assert_eq!(svg.matches(r#"class="point""#).count(), 6);
    assert!(svg.contains("Qwen3-32B"));
}

#[test]
fn report_command_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_report(&[fixture()], dir.path()).unwrap();
    assert_eq!(out.size_points, 12);
    assert!(out.ablation_chart.is_none());
    let csv = std::fs::read_to_string(&out.csv).unwrap();
    assert_eq!(csv.lines().count(), 13);
    assert!(csv.lines().any(|l| l == "Qwen3-32B,32,MuRAL,0.537000,0.00,0.00"));
    assert!(cmd_report(&[], dir.path()).is_err());
}

#[test]
fn ablation_chart_has_reference_lines() {
    let chart = ablation_chart(
        "MuRAL",
        &[(1, 0.31), (3, 0.45), (15, 0.5068)],
        &[
            ReferenceLine {
                caption: "Teacher model".into(),
                y: 0.537,
            },
            ReferenceLine {
                caption: "Student not fine-tuned".into(),
                y: 0.1081,
            },
        ],
    );
    let svg = chart.to_svg();
    assert_eq!(svg.matches(r#"class="point""#).count(), 3);
    assert_eq!(svg.matches(r#"class="reference""#).count(), 2);
    assert!(svg.contains("stroke-dasharray"));
}
