use elevspace::analysis::{analyze_stride, AnalysisOptions};
use elevspace::io::{load_trial, resolve_events, segment_strides, write_trial, EventSource, LoadOptions, DEFAULT_GRID};
use elevspace::synthetic::SyntheticGait;

#[test]
fn written_trial_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let rec = SyntheticGait::able_bodied("rt").record();
    let path = write_trial(dir.path(), &rec).unwrap();
    let back = load_trial(&path, &LoadOptions { strict: true, ..Default::default() }).unwrap();
    assert_eq!(back.id, rec.id);
    assert_eq!(back.events, rec.events);
    assert_eq!(back.metadata.side, rec.metadata.side);
    for (a, b) in back.angles_deg.iter().zip(&rec.angles_deg) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-8 * y.abs().max(1.0));
        }
    }
}

#[test]
fn file_events_take_precedence() {
    let rec = SyntheticGait::able_bodied("e").record();
    let (ev, src, conf) = resolve_events(&rec).unwrap();
    assert_eq!(src, EventSource::File);
    assert!(conf.is_none());
    assert_eq!(Some(ev), rec.events);

    let mut g = SyntheticGait::able_bodied("e2");
    g.events = false;
    g.strides = 6;
    let (_, src, conf) = resolve_events(&g.record()).unwrap();
    assert_eq!(src, EventSource::Detected);
    assert!(conf.unwrap() > 0.5);
}

#[test]
fn planar_gait_power_matches() {
    let rec = SyntheticGait::planar("p").record();
    let seg = segment_strides(&rec, rec.events.as_ref().unwrap(), DEFAULT_GRID).unwrap();
    assert_eq!(seg.strides.len(), 5);
    for s in &seg.strides {
        let a = analyze_stride(s, rec.metadata.side, &AnalysisOptions::default()).unwrap();
        let p = a.power.unwrap();
        let scale = p.joint_power.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (j, e) in p.joint_power.iter().zip(&p.esm_power) {
            assert!((j - e).abs() <= 1e-9 * scale);
        }
    }
}

#[test]
fn locked_ankle_swing_fit() {
    let mut g = SyntheticGait::passive("lock");
    g.out_of_plane = 0.0;
    let rec = g.record();
    let seg = segment_strides(&rec, rec.events.as_ref().unwrap(), DEFAULT_GRID).unwrap();
    let a = analyze_stride(&seg.strides[0], rec.metadata.side, &AnalysisOptions::default()).unwrap();
    let fit = a.shank_foot.unwrap();
    assert!((fit.slope - 1.0).abs() < 1e-9);
    assert!((fit.bias + 90.0).abs() < 1e-7);
}
