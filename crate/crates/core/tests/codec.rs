use std::collections::HashSet;

use nnd_core::codec::{bhattacharyya_parameters, MAX_ENUMERABLE_K};
use nnd_core::{rng, BitVector, Codebook, Error, PolarCode};
use proptest::prelude::*;
use rand::Rng;

/// `F^{⊗n}` built by repeated Kronecker products, as a dense 0/1 matrix.
fn kronecker_generator(n: usize) -> Vec<Vec<u8>> {
    let mut g = vec![vec![1u8]];
    while g.len() < n {
        let m = g.len();
        let mut next = vec![vec![0u8; 2 * m]; 2 * m];
        // F = [[1, 0], [1, 1]]
        for (bi, bj) in [(0, 0), (1, 0), (1, 1)] {
            for i in 0..m {
                for j in 0..m {
                    next[bi * m + i][bj * m + j] = g[i][j];
                }
            }
        }
        g = next;
    }
    g
}

fn matrix_encode(code: &PolarCode, x: &BitVector) -> Vec<u8> {
    let n = code.n();
    let g = kronecker_generator(n);
    let mut u = vec![0u8; n];
    for (&pos, &bit) in code.info_positions().iter().zip(x.bits()) {
        u[pos] = bit;
    }
    (0..n)
        .map(|j| (0..n).fold(0u8, |acc, i| acc ^ (u[i] & g[i][j])))
        .collect()
}

fn random_word<R: Rng>(len: usize, rng: &mut R) -> BitVector {
    BitVector::new((0..len).map(|_| rng.random_range(0..2u8)).collect()).unwrap()
}

#[test]
fn encoder_matches_explicit_generator_matrix() {
    let mut r = rng::stream(11, 0, 0);
    for n in [2, 4, 8, 16, 32, 64] {
        for k in [1, n / 2, n] {
            let code = PolarCode::construct(n, k).unwrap();
            for _ in 0..200 {
                let x = random_word(k, &mut r);
                assert_eq!(
                    code.encode(&x).unwrap().bits(),
                    matrix_encode(&code, &x).as_slice(),
                    "n={n} k={k}"
                );
            }
        }
    }
}

#[test]
fn encoder_is_linear() {
    let mut r = rng::stream(12, 0, 0);
    for n in [8, 16, 32] {
        let code = PolarCode::construct(n, n / 2).unwrap();
        for _ in 0..1000 {
            let a = random_word(n / 2, &mut r);
            let b = random_word(n / 2, &mut r);
            let lhs = code.encode(&a.xor(&b).unwrap()).unwrap();
            let rhs = code
                .encode(&a)
                .unwrap()
                .xor(&code.encode(&b).unwrap())
                .unwrap();
            assert_eq!(lhs, rhs);
        }
    }
}

#[test]
fn encoder_is_injective_on_random_pairs() {
    let mut r = rng::stream(13, 0, 0);
    for n in [8, 16, 32] {
        let code = PolarCode::construct(n, n / 2).unwrap();
        for _ in 0..1000 {
            let a = random_word(n / 2, &mut r);
            let b = random_word(n / 2, &mut r);
            assert_eq!(a == b, code.encode(&a).unwrap() == code.encode(&b).unwrap());
        }
    }
}

#[test]
fn codebooks_have_distinct_codewords() {
    for (n, k) in [(2, 1), (4, 2), (8, 4), (16, 8), (32, 16)] {
        let book = Codebook::enumerate(&PolarCode::construct(n, k).unwrap()).unwrap();
        assert_eq!(book.len(), 1 << k);
        let distinct: HashSet<&[u8]> = (0..book.len()).map(|i| book.codeword(i).bits()).collect();
        assert_eq!(distinct.len(), 1 << k, "n={n}");
        assert!(book.codeword(0).bits().iter().all(|&b| b == 0));
        for i in 0..book.len() {
            assert_eq!(book.info_word(i).to_index(), i as u64);
        }
    }
}

#[test]
fn frozen_positions_stay_zero_before_the_transform() {
    let mut r = rng::stream(14, 0, 0);
    for n in [8, 16, 32] {
        let code = PolarCode::construct(n, n / 2).unwrap();
        let x = random_word(n / 2, &mut r);
        let u = code.generator_input(&x).unwrap();
        for p in code.frozen_positions() {
            assert_eq!(u.get(p), 0);
        }
        for (&p, &b) in code.info_positions().iter().zip(x.bits()) {
            assert_eq!(u.get(p), b);
        }
    }
}

#[test]
fn oversized_codebook_is_a_resource_error() {
    let code = PolarCode::construct(64, MAX_ENUMERABLE_K + 1).unwrap();
    assert!(matches!(
        Codebook::enumerate(&code),
        Err(Error::Resource(_))
    ));
}

/// Probability that bit `i` of `u` stays undetermined on a binary erasure
/// channel with erasure probability 1/2, given `u_0..u_{i-1}` and the
/// unerased coordinates of `c = u G`. Exhaustive over erasure patterns.
fn erasure_probability(n: usize, i: usize) -> f64 {
    let g = kronecker_generator(n);
    let free = n - i - 1;
    let mut undetermined = 0u64;
    for pattern in 0u64..(1 << n) {
        // bit j of `pattern` set: coordinate j is erased
        // u_i is undetermined iff some v with v_{<i} = 0, v_i = 1 has
        // (v G)_j = 0 on every unerased coordinate j.
        let ambiguous = (0u64..(1 << free)).any(|tail| {
            let mut v = vec![0u8; n];
            v[i] = 1;
            for t in 0..free {
                v[i + 1 + t] = ((tail >> t) & 1) as u8;
            }
            (0..n).all(|j| {
                pattern >> j & 1 == 1 || (0..n).fold(0u8, |acc, r| acc ^ (v[r] & g[r][j])) == 0
            })
        });
        undetermined += u64::from(ambiguous);
    }
    undetermined as f64 / (1u64 << n) as f64
}

#[test]
fn bhattacharyya_values_match_brute_force_erasure_oracle() {
    for n in [2, 4, 8] {
        let z = bhattacharyya_parameters(n);
        for (i, &zi) in z.iter().enumerate() {
            let oracle = erasure_probability(n, i);
            assert!((zi - oracle).abs() < 1e-12, "n={n} i={i}: {zi} vs {oracle}");
        }
    }
}

#[test]
fn information_set_holds_the_k_most_reliable_positions() {
    for n in [8, 16, 32, 64] {
        let z = bhattacharyya_parameters(n);
        for k in 1..=n {
            let code = PolarCode::construct(n, k).unwrap();
            let worst_info = code
                .info_positions()
                .iter()
                .map(|&p| z[p])
                .fold(f64::MIN, f64::max);
            let best_frozen = code
                .frozen_positions()
                .iter()
                .map(|&p| z[p])
                .fold(f64::MAX, f64::min);
            assert!(worst_info <= best_frozen, "n={n} k={k}");
        }
    }
}

proptest! {
    #[test]
    fn bitvector_index_round_trip(len in 1usize..=64, value in any::<u64>()) {
        let value = if len == 64 { value } else { value & ((1u64 << len) - 1) };
        let v = BitVector::from_index(value, len);
        prop_assert_eq!(v.len(), len);
        prop_assert_eq!(v.to_index(), value);
    }

    #[test]
    fn bitvector_json_round_trip(bits in proptest::collection::vec(0u8..2, 1..100)) {
        let v = BitVector::new(bits).unwrap();
        let back: BitVector = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        prop_assert_eq!(back, v);
    }

    #[test]
    fn hamming_distance_is_weight_of_xor(a in proptest::collection::vec(0u8..2, 16), b in proptest::collection::vec(0u8..2, 16)) {
        let a = BitVector::new(a).unwrap();
        let b = BitVector::new(b).unwrap();
        prop_assert_eq!(a.hamming_distance(&b), a.xor(&b).unwrap().weight());
    }
}

#[test]
fn bitvector_rejects_non_binary_entries() {
    assert!(BitVector::new(vec![0, 2]).is_err());
    assert!(serde_json::from_str::<BitVector>("[0,1,3]").is_err());
}
