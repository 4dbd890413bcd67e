use shle::detection::DetectionSet;
use shle::geometry::{CameraRig, DisparityMap, Intrinsics};
use shle::io::read_manifest;
use shle::pipeline::{run_corpus, run_scene, SceneSource, SkipReason};
use shle::synthetic::{generate_scene, linear_trajectory, PerturbKind, SceneSpec, SyntheticScene};
use shle::tracking::{IntensityImage, IntensitySource};
use shle::{Error, PipelineConfig};

fn small_rig() -> CameraRig {
    CameraRig::with_default_extrinsics(
        Intrinsics {
            fx: 700.0,
            fy: 700.0,
            cx: 320.0,
            cy: 180.0,
            width: 640,
            height: 360,
        },
        0.12,
        1.45,
    )
    .unwrap()
}

fn small_spec() -> SceneSpec {
    SceneSpec::new(&small_rig(), linear_trajectory(30.0, 10.0, 12))
}

fn noisy(seed: u64) -> SyntheticScene {
    let mut spec = small_spec();
    spec.noise = 0.25;
    spec.spurious_fraction = 0.01;
    spec.decoy_boxes = 3;
    spec.detection_dropout = 0.3;
    spec.seed = seed;
    generate_scene(&spec).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn library_usage_on_a_written_scene() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate_scene(&small_spec())
        .unwrap()
        .write_to(dir.path())
        .unwrap();

    let scene = read_manifest(&path).unwrap();
    let estimate = run_scene(&scene, &PipelineConfig::default()).unwrap();
    assert!((estimate.scene_height() - 3.5).abs() <= 0.01);
}

#[test]
fn manifest_and_in_memory_scenes_agree_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let synthetic = noisy(4);
    let path = synthetic.write_to(dir.path()).unwrap();
    let loaded = read_manifest(&path).unwrap();
    let config = PipelineConfig::default();
    let a = run_scene(&synthetic, &config).unwrap();
    let b = run_scene(&loaded, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(loaded.ground_truth_height(), Some(3.5));
}

#[test]
fn thread_count_does_not_change_results() {
    let scene = noisy(9);
    let config = PipelineConfig::default();
    let one = in_pool(1, || run_scene(&scene, &config).unwrap());
    let three = in_pool(3, || run_scene(&scene, &config).unwrap());
    assert_eq!(one, three);
    let bits = |e: &shle::SceneEstimate| -> Vec<u64> {
        e.series.filtered.iter().map(|(_, h)| h.to_bits()).collect()
    };
    assert_eq!(bits(&one), bits(&three));
}

#[test]
fn repeated_generation_is_deterministic() {
    let a = noisy(2);
    let b = noisy(2);
    for k in 0..a.frame_count() as u64 {
        assert!(a.disparity(k).unwrap().bit_eq(&b.disparity(k).unwrap()));
    }
    assert_eq!(a.detections(), b.detections());
}

#[test]
fn more_noise_never_helps_by_more_than_five_millimetres() {
    let levels = [0.0, 0.1, 0.25];
    let mean_abs_he: Vec<f64> = levels
        .iter()
        .map(|&noise| {
            (0..3u64)
                .map(|seed| {
                    let mut spec = small_spec();
                    spec.noise = noise;
                    spec.seed = seed;
                    let scene = generate_scene(&spec).unwrap();
                    let est = run_scene(&scene, &PipelineConfig::default()).unwrap();
                    (est.scene_height() - 3.5).abs()
                })
                .sum::<f64>()
                / 3.0
        })
        .collect();
    for pair in mean_abs_he.windows(2) {
        assert!(pair[1] >= pair[0] - 0.005, "{levels:?} -> {mean_abs_he:?}");
    }
    assert!(mean_abs_he.iter().all(|&e| e <= 0.10), "{mean_abs_he:?}");
}

#[test]
fn dropout_leaves_the_scene_height_within_a_centimetre() {
    let base = generate_scene(&small_spec()).unwrap();
    let dropped = base.perturb(PerturbKind::Dropout, 0.5).unwrap();
    assert_eq!(dropped.withheld_frames().len(), 6);
    let config = PipelineConfig::default();
    let a = run_scene(&base, &config).unwrap().scene_height();
    let b = run_scene(&dropped, &config).unwrap().scene_height();
    assert!((a - b).abs() <= 0.01, "{a} vs {b}");
}

#[test]
fn every_frame_is_either_estimated_or_skipped_once() {
    for seed in 0..4 {
        let scene = noisy(seed);
        let est = run_scene(&scene, &PipelineConfig::default()).unwrap();
        let mut seen: Vec<u64> = est
            .series
            .frames
            .iter()
            .map(|(k, _)| *k)
            .chain(est.skipped.iter().map(|(k, _)| *k))
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, scene.frame_indices());
    }
}

/// Serves one frame's disparity as all-invalid.
struct Blinded<'a> {
    inner: &'a SyntheticScene,
    frame: u64,
    truth: bool,
}

impl IntensitySource for Blinded<'_> {
    fn intensity(&self, frame: u64) -> shle::Result<Option<IntensityImage>> {
        self.inner.intensity(frame)
    }
}

impl SceneSource for Blinded<'_> {
    fn rig(&self) -> &CameraRig {
        SceneSource::rig(self.inner)
    }

    fn frame_indices(&self) -> Vec<u64> {
        self.inner.frame_indices()
    }

    fn detections(&self, frame: u64) -> Option<DetectionSet> {
        SceneSource::detections(self.inner, frame)
    }

    fn disparity(&self, frame: u64) -> shle::Result<DisparityMap> {
        let d = self.inner.disparity(frame)?;
        if frame == self.frame {
            return Ok(DisparityMap::filled(d.width(), d.height(), f32::NAN));
        }
        Ok(d)
    }

    fn ground_truth_height(&self) -> Option<f64> {
        self.truth.then(|| self.inner.ground_truth().scene_height_m)
    }
}

#[test]
fn a_skipped_frame_leaves_other_raw_heights_untouched() {
    let scene = noisy(6);
    let config = PipelineConfig::default();
    let full = run_scene(&scene, &config).unwrap();
    let blinded = Blinded {
        inner: &scene,
        frame: full.series.frames[2].0,
        truth: true,
    };
    let partial = run_scene(&blinded, &config).unwrap();
    assert!(partial
        .skipped
        .contains(&(blinded.frame, SkipReason::EmptyExtraction)));
    let expected: Vec<(u64, f64)> = full
        .series
        .frames
        .iter()
        .copied()
        .filter(|(k, _)| *k != blinded.frame)
        .collect();
    assert_eq!(partial.series.frames, expected);
}

#[test]
fn frames_outside_the_anchor_range_are_skipped_as_no_box() {
    let mut spec = small_spec();
    spec.detection_dropout = 0.5;
    spec.seed = 3;
    let scene = generate_scene(&spec).unwrap();
    let withheld = scene.withheld_frames().clone();
    assert_eq!(withheld.len(), 6);
    let est = run_scene(&scene, &PipelineConfig::default()).unwrap();
    let kept: Vec<u64> = (0..12).filter(|k| !withheld.contains(k)).collect();
    let (first, last) = (kept[0], *kept.last().unwrap());
    for (k, reason) in &est.skipped {
        assert_eq!(*reason, SkipReason::NoBox);
        assert!(*k < first || *k > last);
    }
    assert_eq!(est.series.frames.len() as u64, last - first + 1);
}

#[test]
fn scene_without_detections_has_no_estimate() {
    let mut spec = small_spec();
    spec.detection_dropout = 1.0;
    let scene = generate_scene(&spec).unwrap();
    assert!(matches!(
        run_scene(&scene, &PipelineConfig::default()),
        Err(Error::NoSceneEstimate)
    ));
}

#[test]
fn ncc_tracker_runs_on_rendered_images() {
    // Slow enough that per-frame motion stays inside the search window.
    let mut spec = SceneSpec::new(&CameraRig::reference(), linear_trajectory(70.0, 10.0, 60));
    spec.detection_dropout = 0.5;
    spec.seed = 5;
    let scene = generate_scene(&spec).unwrap();
    let config = PipelineConfig {
        tracker: shle::TrackerKind::Ncc,
        ..PipelineConfig::default()
    };
    let est = run_scene(&scene, &config).unwrap();
    assert!(!est.tracker_fallback);
    let he = est.scene_height() - 3.5;
    assert!(he.abs() <= 0.10, "HE {he} skipped {:?}", est.skipped);
}

#[test]
fn corpus_summary_covers_scenes_with_truth() {
    let a = noisy(0);
    let b = noisy(1);
    let report = run_corpus(
        &[
            ("a".to_string(), &a as &dyn SceneSource),
            ("b".to_string(), &b),
        ],
        &PipelineConfig::default(),
    );
    assert_eq!(report.scenes.len(), 2);
    let summary = report.summary.unwrap();
    assert_eq!(summary.scenes, 2);
    let mean: f64 = report
        .scenes
        .iter()
        .map(|s| s.metrics.unwrap().he.abs())
        .sum::<f64>()
        / 2.0;
    assert!((summary.mean_abs_he - mean).abs() < 1e-15);
}

#[test]
fn corpus_excludes_scenes_without_truth_from_the_summary() {
    let a = noisy(0);
    let b = noisy(1);
    let anonymous = Blinded {
        inner: &b,
        frame: u64::MAX,
        truth: false,
    };
    let report = run_corpus(
        &[
            ("a".to_string(), &a as &dyn SceneSource),
            ("b".to_string(), &anonymous),
        ],
        &PipelineConfig::default(),
    );
    assert_eq!(report.scenes.len(), 2);
    assert!(report.scenes[1].estimate.is_ok());
    assert!(report.scenes[1].metrics.is_none());
    let summary = report.summary.unwrap();
    assert_eq!(summary.scenes, 1);
    assert_eq!(
        summary.mean_abs_he,
        report.scenes[0].metrics.unwrap().he.abs()
    );
}
