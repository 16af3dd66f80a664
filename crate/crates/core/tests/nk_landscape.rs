mod common;

use hdea::nk::NkLandscape;
use hdea::BitGenome;

fn hill_climb(l: &NkLandscape, mut g: BitGenome) -> BitGenome {
    let mut f = l.evaluate(&g).unwrap();
    loop {
        let mut improved = false;
        for i in 0..g.len() {
            g.flip(i);
            let h = l.evaluate(&g).unwrap();
            if h > f {
                f = h;
                improved = true;
            } else {
                g.flip(i);
            }
        }
        if !improved {
            return g;
        }
    }
}

#[test]
fn separable_landscapes_are_climbed_to_the_optimum() {
    let mut r = common::rng(3);
    for seed in 0..20 {
        let l = NkLandscape::generate(16, 0, seed).unwrap();
        let (opt, best) = l.brute_force_optimum().unwrap();
        for _ in 0..5 {
            let top = hill_climb(&l, common::random_bits(&mut r, 16));
            assert_eq!(l.evaluate(&top).unwrap(), best);
            assert_eq!(top, opt);
        }
    }
}

#[test]
fn local_optima_grow_with_k() {
    let mean_count = |k: usize| {
        let total: usize = (0..20)
            .map(|seed| {
                NkLandscape::generate(12, k, seed)
                    .unwrap()
                    .count_local_optima()
                    .unwrap()
            })
            .sum();
        total as f64 / 20.0
    };
    let counts: Vec<f64> = [0, 2, 6, 10].into_iter().map(mean_count).collect();
    assert_eq!(counts[0], 1.0);
    assert!(counts.windows(2).all(|w| w[1] > w[0]), "{counts:?}");
}

#[test]
fn optimum_dominates_random_genomes() {
    let mut r = common::rng(8);
    let l = NkLandscape::generate(14, 5, 77).unwrap();
    let (_, best) = l.brute_force_optimum().unwrap();
    for _ in 0..1_000 {
        let g = common::random_bits(&mut r, 14);
        let f = l.evaluate(&g).unwrap();
        assert!(f <= best);
        assert!((0.0..1.0).contains(&f));
    }
}
