//! Finite filtered probability spaces: exact canonical pairs and exhaustive
//! checks of the random-time identities.

mod checks;
mod generate;
mod pair;
mod stopping;
mod tree;

pub use checks::{
    avoidance_equivalences, dominance_check, expectation_via_qu, lhs_expectation,
    martingale_residual, numeraire_check, pair_identity_residual, pathwise_support_checks,
    q_measure, verify_pair_identity, AvoidanceReport, DominanceReport, NumeraireReport,
};
pub use generate::{
    generate_corpus, random_adapted, random_monotone_fn, random_path_functional,
    random_supermartingale, random_time, random_tree, CorpusEntry, MonotoneFn, RhoKind, TreeCorpus, CORPUS_SEED,
    CORPUS_SIZE,
};
pub use pair::{canonical_pair, conditional_laws, CanonicalPairTable, ConditionalLaws};
pub use stopping::{enumerate_stopping_times, StoppingTime};
pub use tree::{FiniteTree, NodeTable, RandomTimeSpec};

/// The corpus shipped with the crate (regenerated by `generate_corpus`).
pub fn shipped_corpus() -> crate::Result<TreeCorpus> {
    TreeCorpus::from_json(include_str!("../../data/tree_corpus.json"))
}
