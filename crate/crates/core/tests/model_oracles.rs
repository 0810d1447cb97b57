mod common;

use nalgebra::{DMatrix, DVector};

use sldm::graph::SignedGraph;
use sldm::model::{
    compose_archetypes, gate_matrix, gradient, mixture_weights, negative_log_posterior, Latent, Objective,
};
use sldm::{ModelKind, Params, Topology, Variant};

use common::*;

fn empty_graph(n: usize, directed: bool) -> SignedGraph {
    SignedGraph::new(n, Vec::new(), directed, None).unwrap()
}

#[test]
fn log_rates_match_scalar_oracle_for_every_variant() {
    let mut r = rng(11);
    for v in all_variants() {
        for k in [1, 2, 4] {
            let p = random_params(v, k, 7, 1.5, &mut r);
            let (pos, _) = naive_positions(&p);
            let pairs: Vec<(usize, usize)> = (0..7).flat_map(|i| (0..7).map(move |j| (i, j))).filter(|(i, j)| i != j).collect();
            let got = p.log_rates(&pairs).unwrap();
            for (&(i, j), &(a, b)) in pairs.iter().zip(&got) {
                let (ea, eb) = naive_log_rates(&p, &pos, i, j);
                assert!((a - ea).abs() <= 1e-12 * ea.abs().max(1.0), "{} k={k} ({i},{j}) pos", v.label());
                assert!((b - eb).abs() <= 1e-12 * eb.abs().max(1.0), "{} k={k} ({i},{j}) neg", v.label());
            }
        }
    }
}

#[test]
fn block_loss_matches_double_loop_oracle() {
    let mut r = rng(12);
    for v in all_variants() {
        let g = random_graph(10, v.is_directed(), 0.35, &mut r);
        let p = random_params(v, 3, 10, 0.8, &mut r);
        for (block, rescale) in [(vec![0, 2, 3, 7, 9], false), (vec![1, 4, 5, 6], true), ((0..10).collect(), false)] {
            let obj = Objective { rho: 0.7, rescale, deterministic: true };
            let got = negative_log_posterior(&p, &g, &block, &obj).unwrap();
            let want = naive_loss(&p, &g, &block, 0.7, rescale);
            assert!((got - want).abs() <= 1e-10 * want.abs(), "{}: {got} vs {want}", v.label());
        }
    }
}

#[test]
fn tiny_blocks_reduce_to_the_prior() {
    let mut r = rng(13);
    for v in all_variants() {
        let g = random_graph(6, v.is_directed(), 0.5, &mut r);
        let p = random_params(v, 2, 6, 1.0, &mut r);
        let obj = Objective { rho: 2.0, ..Objective::default() };
        let prior = naive_loss(&p, &g, &[], 2.0, false);
        let got = negative_log_posterior(&p, &g, &[3], &obj).unwrap();
        assert!((got - prior).abs() <= 1e-12 * prior.abs(), "{}", v.label());
    }
}

#[test]
fn unit_rates_on_empty_graph_give_closed_form() {
    let per_pair = 2.0 - bessel_i_reference(0, 2.0).ln();
    let n = 6;
    for (topology, pairs) in [(Topology::Undirected, n * (n - 1) / 2), (Topology::Directed, n * (n - 1))] {
        let v = Variant::new(ModelKind::Sldm, topology);
        let p = Params::zeros(v, 3, n);
        let obj = Objective { rho: 0.0, ..Objective::default() };
        let all: Vec<usize> = (0..n).collect();
        let got = negative_log_posterior(&p, &empty_graph(n, v.is_directed()), &all, &obj).unwrap();
        let want = pairs as f64 * per_pair;
        assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
    }
}

#[test]
fn effect_prior_gradient_vanishes_at_zero_effects() {
    let mut r = rng(14);
    for v in all_variants() {
        let g = random_graph(8, v.is_directed(), 0.4, &mut r);
        let mut p = random_params(v, 2, 8, 1.0, &mut r);
        for e in &mut p.effects {
            e.fill(0.0);
        }
        let all: Vec<usize> = (0..8).collect();
        let with = gradient(&p, &g, &all, &Objective { rho: 3.0, ..Objective::default() }).unwrap();
        let without = gradient(&p, &g, &all, &Objective { rho: 0.0, ..Objective::default() }).unwrap();
        for (a, b) in with.effects.iter().zip(&without.effects) {
            assert_eq!(a, b, "{}", v.label());
        }
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut r = rng(15);
    for v in all_variants() {
        let g = random_graph(7, v.is_directed(), 0.45, &mut r);
        let p = random_params(v, 3, 7, 0.6, &mut r);
        let obj = Objective { rho: 0.5, rescale: true, deterministic: true };
        let err = fd_relative_error(&p, &g, &[0, 1, 3, 4, 6], &obj, 1e-5);
        assert!(err <= 1e-5, "{}: {err}", v.label());
    }
}

#[test]
fn open_gates_select_normalized_mixtures() {
    let mut r = rng(16);
    let v = Variant::new(ModelKind::Slim, Topology::Undirected);
    let Latent::Archetypal { logits, .. } = random_params(v, 3, 9, 2.0, &mut r).latent else { unreachable!() };
    let z = mixture_weights(&logits[0]);
    let c = gate_matrix(&z, &DMatrix::from_element(3, 9, 50.0)).unwrap();
    for d in 0..3 {
        let row_sum: f64 = z.row(d).sum();
        for i in 0..9 {
            assert!((c[(i, d)] - z[(d, i)] / row_sum).abs() <= 1e-15);
        }
    }
}

#[test]
fn single_node_selection_is_all_ones() {
    let z = mixture_weights(&DMatrix::from_vec(4, 1, vec![0.3, -1.0, 2.0, 0.0]));
    let c = gate_matrix(&z, &DMatrix::from_vec(4, 1, vec![-2.0, 0.0, 5.0, 1.0])).unwrap();
    assert_eq!(c, DMatrix::from_element(1, 4, 1.0));
}

#[test]
fn one_dimensional_archetype_equals_basis() {
    let z = mixture_weights(&DMatrix::from_vec(1, 5, vec![0.1, 3.0, -2.0, 0.0, 1.0]));
    assert!(z.iter().all(|&x| x == 1.0));
    let c = gate_matrix(&z, &DMatrix::from_vec(1, 5, vec![-1.0, 0.5, 2.0, -3.0, 0.0])).unwrap();
    let a = compose_archetypes(&DMatrix::from_element(1, 1, -1.7), &z, &c).unwrap();
    assert!((a[(0, 0)] + 1.7).abs() <= 1e-15);
}

#[test]
fn far_apart_nodes_have_vanishing_rates() {
    let v = Variant::new(ModelKind::Sldm, Topology::Undirected);
    let positions = vec![DMatrix::from_vec(1, 2, vec![0.0, 800.0])];
    let p = Params::from_parts(v, Latent::Free { positions }, vec![DVector::zeros(2), DVector::from_vec(vec![-500.0, -500.0])]).unwrap();
    let (a, b) = p.log_rates(&[(0, 1)]).unwrap()[0];
    assert!(a < -700.0 && b < -100.0);
    let g = empty_graph(2, false);
    let loss = negative_log_posterior(&p, &g, &[0, 1], &Objective { rho: 0.0, ..Objective::default() }).unwrap();
    assert!(loss.is_finite() && loss < 1e-10);
}
