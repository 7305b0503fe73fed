use proptest::prelude::*;

use rrg_core::chebyshev::{Basis, ChebSeries};
use rrg_core::graph::{couple_conditioned, removed_edges, sample_graph, satisfies_coupling_shape};
use rrg_core::harness::random_cycle_trail;
use rrg_core::limits::{poisson_pmf, tv_distance, DEFAULT_EPS};
use rrg_core::rng;
use rrg_core::spectra::{cnbw_from_spectrum, eigenvalues};
use rrg_core::walks::{count_cnbw_transfer, count_cnbw_words, count_nbw_dp, nbw_from_cnbw};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjacency_is_symmetric_and_regular(n in 1usize..40, d in 1usize..4, seed in any::<u64>()) {
        let a = sample_graph(n, d, seed).unwrap().adjacency();
        prop_assert!(a.is_symmetric());
        prop_assert!(a.row_sums().iter().all(|&s| s == 2 * d as u64));
    }

    #[test]
    fn walk_counters_agree(n in 1usize..30, d in 1usize..3, seed in any::<u64>()) {
        let g = sample_graph(n, d, seed).unwrap();
        let transfer = count_cnbw_transfer(&g, 6).unwrap();
        prop_assert_eq!(count_cnbw_words(&g, 6).unwrap(), transfer.clone());
        let (recursion, dp) = (nbw_from_cnbw(&transfer).unwrap(), count_nbw_dp(&g, 6).unwrap());
        prop_assert_eq!(recursion.values(), dp.values());
    }

    #[test]
    fn spectrum_reproduces_walk_counts(n in 2usize..30, d in 1usize..4, seed in any::<u64>()) {
        let g = sample_graph(n, d, seed).unwrap();
        let spectral = cnbw_from_spectrum(&eigenvalues(&g.adjacency(), d).unwrap(), 5).unwrap();
        prop_assert_eq!(spectral.counts, count_cnbw_transfer(&g, 5).unwrap());
    }

    #[test]
    fn coupling_plants_the_cycle(n in 4usize..40, d in 1usize..4, k in 1usize..5, seed in any::<u64>()) {
        let g = sample_graph(n, d, seed).unwrap();
        let s = random_cycle_trail(n, d, k, &mut rng::substream(seed, 1)).unwrap();
        let coupled = couple_conditioned(&g, &s).unwrap();
        prop_assert!(s.appears_in(&coupled));
        for e in removed_edges(&g, &coupled).unwrap() {
            prop_assert!(satisfies_coupling_shape(&e, &s));
        }
        if s.appears_in(&g) {
            prop_assert_eq!(coupled, g);
        }
    }

    #[test]
    fn tv_is_a_metric(a in 0.0f64..20.0, b in 0.0f64..20.0, c in 0.0f64..20.0) {
        let (p, q, r) = (
            poisson_pmf(a, DEFAULT_EPS).unwrap(),
            poisson_pmf(b, DEFAULT_EPS).unwrap(),
            poisson_pmf(c, DEFAULT_EPS).unwrap(),
        );
        let pq = tv_distance(&p, &q).unwrap();
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert!((pq - tv_distance(&q, &p).unwrap()).abs() < 1e-12);
        prop_assert!(pq <= tv_distance(&p, &r).unwrap() + tv_distance(&r, &q).unwrap() + 2.0 * DEFAULT_EPS);
    }

    #[test]
    fn basis_change_preserves_the_function(coeffs in prop::collection::vec(-3.0f64..3.0, 1..9), d in 1usize..6, x in -2.0f64..2.0) {
        let phi = ChebSeries::new(Basis::Phi, coeffs);
        let gamma = phi.to_gamma(d);
        prop_assert!((phi.eval(x) - gamma.eval(x)).abs() < 1e-9);
        let back = gamma.to_phi();
        for (u, v) in back.coeffs.iter().zip(&phi.coeffs) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }
}
