mod common;

use common::*;
use tomo_unfold_core::benchmark::{
    cleanup_profile, is_effective, model_order_selection, run_benchmark, simulate_trial, trial_rng, DetectionTolerance,
    PostprocessConfig, ScattererSpec, SimulationContext, TrialConfig,
};
use tomo_unfold_core::linalg::CVector;
use tomo_unfold_core::model::{MotionBasis, ReflectivityProfile};
use tomo_unfold_core::solver::{AbtConfig, EngineConfig, EngineKind, Hyperparameters, InversionEngine, ScheduleMode};
use tomo_unfold_core::tuning::{grid_search, refine_axis, SampleSet, TuningConfig};

fn context(points: usize, span: f64) -> (SimulationContext, f64) {
    let (r, rho) = elevation_dictionary(points, span);
    (SimulationContext::new(benchmark_geometry(), MotionBasis::none(), r).unwrap(), rho)
}

fn scene(num: usize, distance: f64, snr_db: f64, trials: usize, seed: u64) -> TrialConfig {
    TrialConfig {
        num_scatterers: num,
        normalized_distance: distance,
        amplitude_ratio: 1.0,
        phase_difference: 0.0,
        snr_db,
        trials,
        seed,
        on_grid: true,
        edge_margin: 0.5,
    }
}

fn sweep_engine(ctx: &SimulationContext, kind: EngineKind) -> InversionEngine {
    let cfg = EngineConfig {
        engine: kind,
        abt: AbtConfig {
            schedule: ScheduleMode::Sweep,
            initial_blocksize: Some(1),
            ..Default::default()
        },
    };
    let r = &ctx.dictionary;
    InversionEngine::new(r, &r.entries, ctx.rho_s, cfg).unwrap()
}

fn tuning_config(seed: u64) -> TuningConfig {
    let mut cfg = TuningConfig::with_defaults(scene(1, 0.0, 20.0, 12, seed), 20.0, seed);
    cfg.c1_grid = vec![0.05, 0.2, 0.6];
    cfg.c2_grid = vec![0.0, 0.01];
    cfg.c3_grid = vec![0.4, 0.8];
    cfg.samples = 12;
    cfg.refine_factor = 2;
    cfg
}

#[test]
fn grid_search_beats_every_coarse_candidate() {
    let (ctx, _) = context(60, 8.0);
    for kind in [EngineKind::Baseline, EngineKind::Abt] {
        let engine = sweep_engine(&ctx, kind);
        let cfg = tuning_config(31);
        let result = grid_search(&engine, &ctx, &cfg).unwrap();

        let samples = SampleSet::generate(&cfg.sample_config(), &ctx).unwrap();
        assert_eq!(samples.digest, result.sample_digest);
        let mut coarse = 0;
        for &c1 in &cfg.c1_grid {
            for &c2 in &cfg.c2_grid {
                for &c3 in &cfg.c3_grid {
                    let hp = Hyperparameters::new(c1, c2, c3).with_layers(cfg.num_layers);
                    if let Ok((v, _)) = samples.score(&engine, &hp) {
                        if v.is_finite() {
                            assert!(result.nmse <= v, "{kind:?}: {} > {v} at ({c1}, {c2}, {c3})", result.nmse);
                            coarse += 1;
                        }
                    }
                }
            }
        }
        assert!(coarse > 0);
        assert_eq!(result.level_best.len(), cfg.refine_factor + 1);
        for w in result.level_best.windows(2) {
            assert!(w[1] <= w[0]);
        }
        let rescored = samples.score(&engine, &result.hyperparameters).unwrap().0;
        assert_eq!(rescored, result.nmse);
        assert!(result.trace.iter().all(|c| c.sample_digest == result.sample_digest));
    }
}

#[test]
fn grid_search_is_deterministic() {
    let (ctx, _) = context(40, 6.0);
    let engine = sweep_engine(&ctx, EngineKind::Abt);
    let mut cfg = tuning_config(5);
    cfg.refine_factor = 1;
    let a = grid_search(&engine, &ctx, &cfg).unwrap();
    let b = grid_search(&engine, &ctx, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn refined_axes_bracket_the_incumbent() {
    assert_eq!(refine_axis(&[0.0, 1.0, 2.0, 3.0, 4.0], 2, false), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
    assert_eq!(refine_axis(&[0.0, 1.0, 2.0], 0, false), vec![0.0, 0.5, 1.0]);
    let r = refine_axis(&[0.01, 0.1, 1.0], 1, true);
    assert!((r[1] - 0.1).abs() < 1e-12 && (r[0] - 0.01).abs() < 1e-15 && (r[2] - 1.0).abs() < 1e-12);
    assert_eq!(refine_axis(&[0.3], 0, false), vec![0.3]);
}

#[test]
fn tuning_rejects_unsorted_grid() {
    let mut cfg = tuning_config(1);
    cfg.c3_grid = vec![0.8, 0.4];
    assert!(cfg.validate().is_err());
}

#[test]
fn simulated_scene_respects_distance_and_grid() {
    let (ctx, rho) = context(200, 23.9);
    let cfg = scene(2, 0.8, 6.0, 1, 3);
    for i in 0..50 {
        let t = simulate_trial(&cfg, &ctx, &mut trial_rng(3, i)).unwrap();
        assert_eq!(t.scatterers.len(), 2);
        assert_eq!(t.truth.support().len(), 2);
        let d = t.scatterers[1].elevation - t.scatterers[0].elevation;
        let step = ctx.dictionary.grid.elevation_step().unwrap();
        assert!((d - 0.8 * rho).abs() <= step + 1e-9);
        assert_eq!(t.measurement.len(), 25);
    }
}

#[test]
fn cleanup_and_order_selection_pick_separated_peaks() {
    let (ctx, _) = context(30, 6.0);
    let grid = &ctx.dictionary.grid;
    let mut v = vec![0.0; 30];
    v[5] = 1.0;
    v[6] = 0.9;
    v[7] = 0.2;
    v[12] = 0.6;
    v[20] = 0.04;
    let gamma = ReflectivityProfile::new(CVector::from_iterator(30, v.iter().map(|&x| c(x, 0.0))));
    let cleaned = cleanup_profile(&gamma, 0.05).unwrap();
    assert_eq!(cleaned.support(), vec![5, 6, 7, 12]);
    let found = model_order_selection(&cleaned, grid, 2, 2).unwrap();
    let cells: Vec<f64> = found.iter().map(|s| s.elevation).collect();
    assert_eq!(cells, vec![grid.elevation[5], grid.elevation[12]]);
    assert!(cleanup_profile(&gamma, 1.0).is_err());
}

#[test]
fn effectiveness_needs_count_and_tolerance() {
    let spec = |e: f64| ScattererSpec {
        elevation: e,
        motion_coeffs: vec![],
        amplitude: 1.0,
        phase: 0.0,
    };
    let tol = DetectionTolerance::default();
    let truth = vec![spec(0.0), spec(40.0)];
    assert!(is_effective(&[spec(39.0), spec(1.0)], &truth, &tol, 40.0));
    assert!(!is_effective(&[spec(0.0)], &truth, &tol, 40.0));
    assert!(!is_effective(&[spec(0.0), spec(51.0)], &truth, &tol, 40.0));
}

#[test]
fn benchmark_count_matches_trial_by_trial_replay() {
    let (ctx, _) = context(120, 14.0);
    let engine = sweep_engine(&ctx, EngineKind::Abt);
    let hp = Hyperparameters::new(0.4, 0.0, 0.5);
    let post = PostprocessConfig::default();
    let cfg = scene(2, 2.0, 10.0, 30, 17);
    let curve = run_benchmark(std::slice::from_ref(&cfg), &ctx, &engine, &hp, &post).unwrap();

    let mut hits = 0;
    for i in 0..cfg.trials {
        let mut rng = trial_rng(cfg.seed, i);
        let trial = simulate_trial(&cfg, &ctx, &mut rng).unwrap();
        let est = engine.run(&trial.measurement.entries, &hp, Some(&mut rng)).unwrap();
        let cleaned = cleanup_profile(&est, post.kappa).unwrap();
        let found = model_order_selection(&cleaned, &ctx.dictionary.grid, post.k_max, post.min_separation).unwrap();
        hits += usize::from(is_effective(&found, &trial.scatterers, &post.tolerance, ctx.rho_s));
    }
    assert_eq!(curve[0].effective_detections, hits);
    assert_eq!(curve[0].rate, hits as f64 / cfg.trials as f64);
}
