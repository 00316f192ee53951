use std::collections::VecDeque;

use proptest::prelude::*;
use qcldpc::construction::{
    girth, qc_peg_detailed, validate_distribution, Girth, MetDegreeDistribution,
};
use qcldpc::{expand, BaseMatrix, Error, QCCode};

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// Shortest cycle by deleting each edge and searching for another path
/// between its endpoints. `None` for a forest.
fn brute_girth(code: &QCCode) -> Option<usize> {
    let n = code.n();
    let nodes = n + code.m();
    let adj: Vec<Vec<usize>> = (0..nodes)
        .map(|u| {
            if u < n {
                code.col(u).iter().map(|&c| n + c as usize).collect()
            } else {
                code.row(u - n).iter().map(|&v| v as usize).collect()
            }
        })
        .collect();
    let mut best: Option<usize> = None;
    for v in 0..n {
        for &c in &adj[v] {
            let mut dist = vec![usize::MAX; nodes];
            dist[v] = 0;
            let mut q = VecDeque::from([v]);
            while let Some(u) = q.pop_front() {
                for &w in &adj[u] {
                    if (u == v && w == c) || (u == c && w == v) || dist[w] != usize::MAX {
                        continue;
                    }
                    dist[w] = dist[u] + 1;
                    q.push_back(w);
                }
            }
            if dist[c] != usize::MAX {
                let len = dist[c] + 1;
                best = Some(best.map_or(len, |b| b.min(len)));
            }
        }
    }
    best
}

fn small_base() -> impl Strategy<Value = BaseMatrix> {
    (2usize..=3, 3usize..=5, 2usize..=7).prop_flat_map(|(rows, cols, z)| {
        proptest::collection::vec(-1i32..z as i32, rows * cols).prop_filter_map(
            "every row and column used",
            move |s| {
                let base = BaseMatrix::new(rows, cols, z, s).ok()?;
                let ok_cols = (0..cols).all(|c| (0..rows).any(|r| base.shift(r, c).is_some()));
                ok_cols.then_some(base)
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn girth_matches_brute_force(base in small_base()) {
        let code = expand(&base);
        let cap = 12;
        match (girth(&code, cap).unwrap(), brute_girth(&code)) {
            (Girth::Exact(g), Some(b)) => prop_assert_eq!(g, b),
            (Girth::AtLeast(c), b) => prop_assert!(b.is_none_or(|b| b >= c)),
            (got, b) => prop_assert!(false, "girth {got:?} vs brute force {b:?}"),
        }
    }
}

#[test]
fn rate02_fixture_realizes_its_distribution() {
    let dist = MetDegreeDistribution::load(fixture("met_rate02.met")).unwrap();
    let design = validate_distribution(&dist).unwrap();
    assert!((design.design_rate - 0.2).abs() < 1e-9);
    let base = BaseMatrix::load(fixture("rate02_n8000_z100.base")).unwrap();
    let code = expand(&base);
    assert_eq!((code.n(), code.z()), (8000, 100));
    assert!((code.rate() - 0.2).abs() < 1e-12);
    assert!(girth(&code, 8).unwrap().at_least(6));
}

#[test]
fn rate01_fixture_is_regenerated_by_peg() {
    let dist = MetDegreeDistribution::load(fixture("met_rate01.met")).unwrap();
    let peg = qc_peg_detailed(&dist, 9600, 80, 1).unwrap();
    validate_distribution(&peg.realized_distribution(dist.edge_types)).unwrap();
    assert_eq!(
        peg.base,
        BaseMatrix::load(fixture("rate01_n9600_z80.base")).unwrap()
    );
    assert!(girth(&expand(&peg.base), 8).unwrap().at_least(6));
}

#[test]
fn unbalanced_distribution_is_rejected() {
    let dist = MetDegreeDistribution::load(fixture("met_rate02_unbalanced.met")).unwrap();
    assert!(matches!(
        validate_distribution(&dist),
        Err(Error::EdgeImbalance { .. })
    ));
    assert!(qc_peg_detailed(&dist, 8000, 100, 1).is_err());
}
