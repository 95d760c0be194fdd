use iamot::config::Config;
use iamot::eval::evaluate;
use iamot::pipeline;
use iamot::reid::CameraMode;
use iamot::synth::{scenario_a, DetectorModel, EmbeddingModel, ObjectSpec, ScenarioSpec};
use iamot::tracker::ClassId;

fn crossing(feature_grid: Option<usize>) -> ScenarioSpec {
    let ped = |x0, vx| ObjectSpec { class_id: ClassId::Pedestrian, width: 30, height: 70, x0, y0: 100.0, vx, vy: 0.0, birth: 1, death: 60 };
    ScenarioSpec {
        name: "crossing".into(),
        seed: 11,
        frames: 60,
        img_h: 240,
        img_w: 320,
        fps: 30.0,
        camera_mode: CameraMode::Static,
        objects: vec![ped(20.0, 4.0), ped(260.0, -4.0)],
        occlusions: Vec::new(),
        detector: DetectorModel { dropout: 0.0, score_min: 0.9, score_max: 1.0, box_jitter: 0.0 },
        embedding: EmbeddingModel { dim: 4, noise: 0.05, feature_grid },
    }
}

#[test]
fn crossing_pedestrians_keep_their_ids() {
    for grid in [None, Some(7)] {
        let sc = crossing(grid).generate().unwrap();
        let out = pipeline::run(&sc.detections, &Config::default()).unwrap();
        let rep = evaluate(&out.records, &sc.ground_truth).unwrap();
        assert_eq!(rep.total.ids, 0, "grid {grid:?}\n{rep}");
        assert!(rep.total.motsa() > 0.9, "{rep}");
    }
}

#[test]
fn noisy_detections_still_track() {
    let mut spec = scenario_a();
    spec.detector.dropout = 0.05;
    spec.detector.box_jitter = 1.0;
    spec.embedding.noise = 0.1;
    let sc = spec.generate().unwrap();
    let out = pipeline::run(&sc.detections, &Config::default()).unwrap();
    let rep = evaluate(&out.records, &sc.ground_truth).unwrap();
    assert_eq!(rep.total.ids, 0, "{rep}");
    assert!(rep.total.smotsa() <= rep.total.motsa());
    assert!(rep.total.motsa() > 0.9, "{rep}");
}

#[test]
fn repeated_runs_are_identical() {
    let sc = crossing(Some(5)).generate().unwrap();
    let a = pipeline::run(&sc.detections, &Config::default()).unwrap();
    let b = pipeline::run(&sc.detections, &Config::default()).unwrap();
    assert_eq!(a.records, b.records);
}
