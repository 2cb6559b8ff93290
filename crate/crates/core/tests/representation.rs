use gelation::exactgraph::{derived_laws, law_by_partitions};
use gelation::panjer::{
    auto_theta, conditional_count_pmf, conditional_ensemble, conditional_max_pmf, conditional_n_pmf,
    conditional_profile_law, to_probs,
};

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    (0..len)
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn conditional_profiles_match_restricted_graph_law() {
    for c in [0.5, 2.0] {
        for theta in [1.0, auto_theta(c).unwrap(), 0.5] {
            for n in (2..=12).filter(|&n| n as f64 > c) {
                let graph = law_by_partitions(n, c).unwrap();
                let ens = conditional_ensemble(n, c, theta).unwrap();
                let (restricted, _) = graph.restrict_cmax(ens.law().max_jump());
                let tv = restricted.total_variation(&conditional_profile_law(&ens).unwrap());
                assert!(tv <= 1e-9, "c={c} theta={theta} n={n}: tv={tv:e}");
            }
        }
    }
}

#[test]
fn conditional_marginals_match_graph_marginals() {
    for c in [0.5, 2.0] {
        for n in [3usize, 7, 12] {
            let d = derived_laws(&law_by_partitions(n, c).unwrap());
            let ens = conditional_ensemble(n, c, 1.0).unwrap();
            assert!(max_abs_diff(&to_probs(&conditional_n_pmf(&ens).unwrap()), &d.cn) < 1e-12);
            assert!(max_abs_diff(&to_probs(&conditional_max_pmf(&ens)), &d.cmax) < 1e-12);
            for k in 1..=3 {
                let pmf = to_probs(&conditional_count_pmf(&ens, k).unwrap());
                assert!(max_abs_diff(&pmf, &d.tnk[k - 1]) < 1e-12, "c={c} n={n} k={k}");
            }
        }
    }
}
