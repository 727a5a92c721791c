use nnd_core::channel::add_noise;
use nnd_core::map_oracle::{map_ber, map_decode};
use nnd_core::{rng, Codebook, PolarCode, RealVector};

/// Index of the codeword with the largest Gaussian likelihood
/// `Π_j exp(−(y_j − s_j)² / 2σ²) / sqrt(2πσ²)`; first index wins ties.
fn likelihood_argmax(y: &[f64], book: &Codebook, sigma: f64) -> usize {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma).sqrt();
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..book.len() {
        let lik: f64 = y
            .iter()
            .zip(book.symbols(i))
            .map(|(a, s)| norm * (-(a - s).powi(2) / (2.0 * sigma * sigma)).exp())
            .product();
        if lik > best.1 {
            best = (i, lik);
        }
    }
    best.0
}

#[test]
fn min_distance_equals_gaussian_likelihood_argmax() {
    let book = Codebook::enumerate(&PolarCode::construct(8, 4).unwrap()).unwrap();
    let mut r = rng::stream(21, rng::domain::CHANNEL, 0);
    let mut chooser = rng::stream(21, rng::domain::EVAL, 0);
    for _ in 0..1000 {
        let i = rand::Rng::random_range(&mut chooser, 0..book.len());
        let mut y = book.symbols(i).to_vec();
        add_noise(&mut y, 1.0, &mut r);
        let decision = map_decode(&RealVector::new(y.clone()).unwrap(), &book).unwrap();
        let oracle = likelihood_argmax(&y, &book, 1.0);
        assert_eq!(decision.codeword_index, oracle);
        assert_eq!(&decision.info_bits, book.info_word(oracle));
        let d2: f64 = y
            .iter()
            .zip(book.symbols(oracle))
            .map(|(a, s)| (a - s).powi(2))
            .sum();
        assert!((decision.metric - d2).abs() < 1e-12);
    }
}

#[test]
fn every_clean_codeword_decodes_to_itself() {
    for (n, k) in [(8, 4), (16, 8)] {
        let book = Codebook::enumerate(&PolarCode::construct(n, k).unwrap()).unwrap();
        for i in 0..book.len() {
            let d = map_decode(&RealVector::new(book.symbols(i).to_vec()).unwrap(), &book).unwrap();
            assert_eq!(d.codeword_index, i);
            assert_eq!(d.metric, 0.0);
        }
    }
}

#[test]
fn map_ber_is_non_increasing_in_snr() {
    let code = PolarCode::construct(8, 4).unwrap();
    let bers: Vec<f64> = [0.0, 2.0, 4.0, 6.0]
        .into_iter()
        .map(|db| map_ber(&code, db, 100_000, 31).unwrap())
        .collect();
    let inversions = bers.windows(2).filter(|w| w[1] > w[0]).count();
    let low_ber_inversions = bers
        .windows(2)
        .filter(|w| w[1] > w[0] && w[0] < 1e-4)
        .count();
    assert_eq!(inversions, low_ber_inversions, "{bers:?}");
    assert!(inversions <= 1, "{bers:?}");
    assert!(bers[0] > bers[3]);
}

#[test]
fn map_ber_limits_and_determinism() {
    let code = PolarCode::construct(8, 4).unwrap();
    assert_eq!(map_ber(&code, f64::INFINITY, 10_000, 1).unwrap(), 0.0);
    let floor = map_ber(&code, -40.0, 100_000, 2).unwrap();
    assert!((0.4..=0.6).contains(&floor), "{floor}");
    assert_eq!(
        map_ber(&code, 3.0, 20_000, 5).unwrap(),
        map_ber(&code, 3.0, 20_000, 5).unwrap()
    );
}

#[test]
fn map_ber_does_not_depend_on_thread_count() {
    let code = PolarCode::construct(16, 8).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| map_ber(&code, 2.0, 10_000, 7).unwrap())
    };
    assert_eq!(run(1).to_bits(), run(3).to_bits());
}
