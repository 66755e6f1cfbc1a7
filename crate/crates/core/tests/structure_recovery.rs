mod common;

use common::{all_dags, chain_panel, oracle_bic, skeleton};
use scengen_core::bnet::bic_score;
use scengen_core::{learn_structure, Dag};

fn true_chain(k: usize) -> Dag {
    let nodes = (1..=k).map(|i| format!("X{i}")).collect();
    let parents = (0..k).map(|i| if i == 0 { vec![] } else { vec![i - 1] }).collect();
    Dag::new(nodes, vec![false; k], parents, 6).unwrap()
}

fn learned_parents(d: &Dag) -> Vec<Vec<usize>> {
    (0..d.len()).map(|i| d.parents(i).to_vec()).collect()
}

#[test]
fn bic_matches_oracle() {
    let z = chain_panel(6, 500, 0.9, 1);
    let cols: Vec<Vec<f64>> = (0..6).map(|j| z.column(j)).collect();
    let truth = true_chain(6);
    let got = bic_score(&z, &truth).unwrap();
    let want = oracle_bic(&cols, &learned_parents(&truth));
    assert!((got - want).abs() <= 1e-8 * want.abs(), "{got} vs {want}");
}

#[test]
fn chain_skeleton_is_recovered() {
    let z = chain_panel(6, 2000, 0.9, 7);
    let cols: Vec<Vec<f64>> = (0..6).map(|j| z.column(j)).collect();
    let learned = learn_structure(&z, 6, 5, 42).unwrap();
    let truth = true_chain(6);
    assert_eq!(skeleton(&learned_parents(&learned)), skeleton(&learned_parents(&truth)));

    // every consecutive triple: the best of all 25 three-node DAGs has the chain skeleton
    for a in 0..4 {
        let sub: Vec<Vec<f64>> = cols[a..a + 3].to_vec();
        let best = all_dags(3)
            .into_iter()
            .max_by(|p, q| oracle_bic(&sub, p).total_cmp(&oracle_bic(&sub, q)))
            .unwrap();
        assert_eq!(skeleton(&best), vec![(0, 1), (1, 2)], "triple at {a}");
        let induced: Vec<(usize, usize)> = skeleton(&learned_parents(&learned))
            .into_iter()
            .filter(|&(i, j)| i >= a && j < a + 3)
            .map(|(i, j)| (i - a, j - a))
            .collect();
        assert_eq!(induced, skeleton(&best));
    }

    let got = bic_score(&z, &learned).unwrap();
    let want = bic_score(&z, &truth).unwrap();
    assert!(got >= want - 1e-6, "{got} < {want}");
}

#[test]
fn enumeration_counts_dags() {
    assert_eq!(all_dags(2).len(), 3);
    assert_eq!(all_dags(3).len(), 25);
    assert_eq!(all_dags(4).len(), 543);
}
