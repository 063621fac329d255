use stereo_focus::metrics::{evaluate, MetricParams};
use stereo_focus::pipeline::{run_stream, StreamProcessor};
use stereo_focus::simulate::{synthesize_scene, synthetic_sources, SceneSpec};
use stereo_focus::{EnhancerKind, Mode, Pipeline, PipelineConfig, StereoSignal};

fn config(mode: Mode, enhancer: EnhancerKind) -> PipelineConfig {
    PipelineConfig { mode, enhancer, ..PipelineConfig::default() }
}

#[test]
fn single_source_oracle_beats_discrete_on_ipd() {
    let spec = SceneSpec::single(-3.5, 1.3, Some(5.0), 3.0, 42);
    let sc = synthesize_scene(&spec, &synthetic_sources(&spec)).unwrap();
    let score = |mode| {
        let out = run_stream(&sc.mixture, Some(&sc.clean_sum), &config(mode, EnhancerKind::Oracle)).unwrap();
        evaluate(&out.aligned(), &sc.clean_sum, &MetricParams::default()).unwrap().ipd_error
    };
    let (dual, discrete) = (score(Mode::DualProposed), score(Mode::Discrete));
    assert!(dual < discrete, "dual-proposed {dual} vs discrete {discrete}");
}

#[test]
fn f32_pipeline_tracks_f64() {
    let spec = SceneSpec::random_two_talker(3, 0.2, Some(10.0), 1.5);
    let sc = synthesize_scene(&spec, &synthetic_sources(&spec)).unwrap();
    let x32 = StereoSignal::new(
        sc.mixture.left.iter().map(|v| *v as f32).collect(),
        sc.mixture.right.iter().map(|v| *v as f32).collect(),
        16_000,
    )
    .unwrap();
    for mode in Mode::ALL {
        let c = config(mode, EnhancerKind::Specsub);
        let a = run_stream(&sc.mixture, None, &c).unwrap().signal;
        let b = run_stream(&x32, None, &c).unwrap().signal;
        let peak = a.left.iter().chain(&a.right).fold(0.0f64, |m, v| m.max(v.abs()));
        let err = a
            .left
            .iter()
            .zip(&b.left)
            .chain(a.right.iter().zip(&b.right))
            .fold(0.0f64, |m, (p, q)| m.max((p - *q as f64).abs()));
        assert!(err < 1e-3 * peak, "{mode}: {err} vs peak {peak}");
    }
}

#[test]
fn hop_by_hop_matches_batch() {
    let spec = SceneSpec::random_two_talker(9, 1.0, Some(5.0), 1.0);
    let sc = synthesize_scene(&spec, &synthetic_sources(&spec)).unwrap();
    let c = config(Mode::DualProposed, EnhancerKind::Specsub);
    let batch = run_stream(&sc.mixture, None, &c).unwrap();
    let mut proc = StreamProcessor::new(Pipeline::<f64>::new(c.clone()).unwrap()).unwrap();
    let hop = c.frame.hop;
    let (mut l, mut r) = (Vec::new(), Vec::new());
    let (mut ol, mut or) = (vec![0.0; hop], vec![0.0; hop]);
    let padded = sc.mixture.slice_padded(0, batch.signal.len().div_ceil(hop) * hop);
    for (cl, cr) in padded.left.chunks(hop).zip(padded.right.chunks(hop)) {
        proc.push_hop([cl, cr], None, [&mut ol, &mut or]).unwrap();
        l.extend_from_slice(&ol);
        r.extend_from_slice(&or);
    }
    assert_eq!(&l[..batch.signal.len()], batch.signal.left.as_slice());
    assert_eq!(&r[..batch.signal.len()], batch.signal.right.as_slice());
}

#[test]
fn output_length_is_input_plus_latency() {
    let spec = SceneSpec::single(0.0, 1.0, Some(20.0), 10.0, 1);
    let sc = synthesize_scene(&spec, &synthetic_sources(&spec)).unwrap();
    let out = run_stream(&sc.mixture, None, &PipelineConfig::default()).unwrap();
    assert_eq!(out.signal.len(), 160_000 + 640);
    assert_eq!(out.aligned().len(), 160_000);
    assert_eq!(out.report.input_samples, 160_000);
}
