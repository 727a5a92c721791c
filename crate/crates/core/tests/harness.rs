use std::collections::HashSet;

use nnd_core::harness::{
    codebook_ber, compute_nve, make_training_subset, nnd_ber, sample_batch, select_training_snr,
    subset_size, time_per_sample, train, train_from, Checkpoint, Direction, ExperimentConfig,
    Restrict, TrainSetup, TrainingSubset,
};
use nnd_core::map_oracle::map_ber_with_book;
use nnd_core::neuralnet::AdamConfig;
use nnd_core::{
    rng, ArchKind, ArchitectureSpec, Codebook, Error, NetworkModel, NoiseSpec, PolarCode,
};

fn book(n: usize, k: usize) -> Codebook {
    Codebook::enumerate(&PolarCode::construct(n, k).unwrap()).unwrap()
}

fn model(kind: ArchKind, n: usize, seed: u64) -> NetworkModel {
    NetworkModel::build(
        &ArchitectureSpec::half_rate(kind, n),
        &mut rng::stream(seed, rng::domain::INIT, 0),
    )
    .unwrap()
}

#[test]
fn subset_sizes_round_half_up() {
    let b = book(8, 4);
    assert_eq!(make_training_subset(&b, 0.4, 1).unwrap().len(), 6);
    assert_eq!(
        make_training_subset(&b, 1.0, 1).unwrap().indices,
        (0..16).collect::<Vec<_>>()
    );
    assert_eq!(subset_size(0.01, 16), 1);
    assert_eq!(subset_size(0.40625, 16), 7); // 6.5 rounds up
    for p in [0.4, 0.6, 0.8] {
        let s = make_training_subset(&b, p, 3).unwrap();
        assert_eq!(s.len(), (p * 16.0_f64).round() as usize);
        assert!(s.indices.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s, make_training_subset(&b, p, 3).unwrap());
    }
    assert!(make_training_subset(&b, 0.0, 1).is_err());
    assert!(make_training_subset(&b, 1.5, 1).is_err());
}

#[test]
fn subsets_vary_with_seed() {
    let b = book(16, 8);
    let distinct: HashSet<Vec<usize>> = (0..10)
        .map(|s| make_training_subset(&b, 0.4, s).unwrap().indices)
        .collect();
    assert!(distinct.len() > 1);
}

#[test]
fn noiseless_batches_are_bpsk_symbols_of_subset_words() {
    let b = book(8, 4);
    let subset = make_training_subset(&b, 0.4, 5).unwrap();
    let spec = NoiseSpec::noiseless(0.5, 0).unwrap();
    let (x, y) = sample_batch(
        &subset,
        &b,
        &spec,
        128,
        &mut rng::stream(5, rng::domain::TRAIN_POOL, 0),
    );
    assert_eq!(x.dim(), (128, 8));
    assert_eq!(y.dim(), (128, 4));
    for (xr, yr) in x.rows().into_iter().zip(y.rows()) {
        assert!(xr.iter().all(|&v| v == 1.0 || v == -1.0));
        let idx = yr.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        assert!(subset.contains(idx));
        let symbols: Vec<f32> = b.symbols(idx).iter().map(|&v| v as f32).collect();
        assert_eq!(xr.to_vec(), symbols);
    }
}

#[test]
fn full_subset_batches_cover_the_codebook() {
    let b = book(8, 4);
    let subset = TrainingSubset::full(&b);
    let spec = NoiseSpec::new(2.0, 0.5, 0).unwrap();
    let mut r = rng::stream(6, rng::domain::TRAIN_POOL, 0);
    let mut seen = HashSet::new();
    let mut draws = 0;
    while draws < 10_000 {
        let (_, y) = sample_batch(&subset, &b, &spec, 100, &mut r);
        for row in y.rows() {
            seen.insert(row.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize));
        }
        draws += 100;
    }
    assert_eq!(seen.len(), 16);
}

#[test]
fn zero_model_ber_is_one_half() {
    let b = book(8, 4);
    let mut m = model(ArchKind::Mlp, 8, 1);
    for mut p in m.net.params_mut() {
        p.fill(0.0);
    }
    let ber = nnd_ber(&m, &b, 3.0, 100_000, 2, Restrict::Full).unwrap();
    assert!((0.45..=0.55).contains(&ber), "{ber}");
    assert_eq!(codebook_ber(&m, &b, None).unwrap(), 0.5);
}

#[test]
fn nnd_ber_is_deterministic_and_thread_independent() {
    let b = book(16, 8);
    let m = model(ArchKind::Cnn, 16, 3);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| nnd_ber(&m, &b, 1.0, 5_000, 9, Restrict::Full).unwrap())
    };
    assert_eq!(run(1).to_bits(), run(4).to_bits());
}

#[test]
fn trained_nnd_is_no_better_than_map() {
    let b = book(8, 4);
    let subset = TrainingSubset::full(&b);
    let setup = TrainSetup {
        rho_t_db: Some(3.0),
        batch_size: 128,
        num_train_samples: 100_000,
        seed: 4,
    };
    let (trained, _) = train(
        model(ArchKind::Mlp, 8, 4),
        AdamConfig::default(),
        &subset,
        &b,
        &setup,
        2_000,
    )
    .unwrap();
    let samples = 20_000;
    for (i, snr) in [0.0, 2.0, 4.0].into_iter().enumerate() {
        let nnd = nnd_ber(&trained, &b, snr, samples, 100 + i as u64, Restrict::Full).unwrap();
        let map = map_ber_with_book(&b, snr, samples, 100 + i as u64).unwrap();
        let sd = (map * (1.0 - map) / (4 * samples) as f64).sqrt();
        assert!(nnd >= map - 3.0 * sd, "{snr} dB: nnd {nnd} map {map}");
        assert!(nnd < 0.5);
    }
}

#[test]
fn restricted_evaluation_only_draws_subset_words() {
    let b = book(8, 4);
    let subset = make_training_subset(&b, 0.4, 7).unwrap();
    let setup = TrainSetup {
        rho_t_db: None,
        batch_size: 64,
        num_train_samples: 10_000,
        seed: 7,
    };
    let (trained, _) = train(
        model(ArchKind::Mlp, 8, 7),
        AdamConfig::default(),
        &subset,
        &b,
        &setup,
        1_500,
    )
    .unwrap();
    assert_eq!(
        codebook_ber(&trained, &b, Some(&subset.indices)).unwrap(),
        0.0
    );
    assert_eq!(
        nnd_ber(
            &trained,
            &b,
            f64::INFINITY,
            10_000,
            1,
            Restrict::Subset(&subset)
        )
        .unwrap(),
        0.0
    );
}

#[test]
fn checkpoint_resume_through_files_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let b = book(8, 4);
    let subset = make_training_subset(&b, 0.6, 8).unwrap();
    let setup = TrainSetup {
        rho_t_db: Some(1.0),
        batch_size: 32,
        num_train_samples: 200,
        seed: 8,
    };
    for kind in ArchKind::ALL {
        let mut spec = ArchitectureSpec::half_rate(kind, 8);
        spec.rnn_hidden = 8;
        let fresh = NetworkModel::build(&spec, &mut rng::stream(8, rng::domain::INIT, 0)).unwrap();

        let mut straight = Checkpoint::new(fresh.clone(), AdamConfig::default());
        let trace = train_from(&mut straight, &subset, &b, &setup, 25, |_| Ok(())).unwrap();
        assert_eq!(
            trace.iter().map(|p| p.step).collect::<Vec<_>>(),
            vec![1, 10, 25]
        );

        let mut first = Checkpoint::new(fresh, AdamConfig::default());
        train_from(&mut first, &subset, &b, &setup, 11, |_| Ok(())).unwrap();
        let path = dir.path().join(format!("{kind}.json"));
        first.save(&path).unwrap();
        let mut resumed = Checkpoint::load(&path).unwrap();
        train_from(&mut resumed, &subset, &b, &setup, 25, |_| Ok(())).unwrap();
        assert_eq!(resumed, straight, "{kind}");
    }
}

#[test]
fn nve_hand_arithmetic() {
    // ratios {1, 3}
    assert_eq!(compute_nve(&[0.125, 0.375], &[0.125, 0.125]).unwrap(), 2.0);
    assert_eq!(compute_nve(&[0.02, 0.004], &[0.01, 0.002]).unwrap(), 2.0);
    assert_eq!(compute_nve(&[0.5], &[0.25]).unwrap(), 2.0);
    assert!(matches!(
        compute_nve(&[0.1], &[0.0]),
        Err(Error::UndefinedRatio { index: 0 })
    ));
}

#[test]
fn single_point_grid_selects_that_point() {
    let cfg = ExperimentConfig {
        archs: vec![ArchKind::Mlp],
        train_snr_grid_db: vec![3.0],
        eval_snr_grid_db: vec![0.0, 1.0],
        num_val_samples: 2_000,
        num_train_samples: 1_000,
        max_steps: 30,
        ..ExperimentConfig::default()
    };
    let sel = select_training_snr(&cfg.arch_spec(ArchKind::Mlp), 1.0, &cfg).unwrap();
    assert_eq!(sel.rho_t_db, 3.0);
    assert_eq!(sel.table.len(), 1);
    assert!(sel.table[0].nve.unwrap() > 0.0);
}

#[test]
fn selection_scores_every_grid_point() {
    let cfg = ExperimentConfig {
        archs: vec![ArchKind::Mlp],
        train_snr_grid_db: vec![-2.0, 4.0, 20.0],
        eval_snr_grid_db: vec![0.0, 2.0, 4.0],
        num_val_samples: 5_000,
        num_train_samples: 20_000,
        max_steps: 500,
        ..ExperimentConfig::default()
    };
    let sel = select_training_snr(&cfg.arch_spec(ArchKind::Mlp), 1.0, &cfg).unwrap();
    let best = sel
        .table
        .iter()
        .filter_map(|r| r.nve)
        .fold(f64::INFINITY, f64::min);
    let chosen = sel
        .table
        .iter()
        .find(|r| r.rho_t_db == sel.rho_t_db)
        .unwrap();
    assert_eq!(chosen.nve, Some(best));
    assert_eq!(
        sel.table.iter().map(|r| r.rho_t_db).collect::<Vec<_>>(),
        vec![-2.0, 4.0, 20.0]
    );
}

#[test]
fn timing_is_positive_and_backward_costs_more() {
    let m = model(ArchKind::Mlp, 16, 9);
    let forward = time_per_sample(&m, Direction::Forward, 300).unwrap();
    let backward = time_per_sample(&m, Direction::Backward, 300).unwrap();
    assert!(forward > 0.0);
    assert!(backward > forward, "{backward} vs {forward}");
    assert!(time_per_sample(&m, Direction::Forward, 50).is_err());
}
