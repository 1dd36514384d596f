//! Mutual clustering of two comparative document collections.
//!
//! Each collection (short posts and long articles) is modelled as a
//! star-schema heterogeneous information network. Meta-path counts are
//! combined into a similarity matrix per collection, the collections are
//! tied together by anchor pairs (a post hyperlinking an article it shares
//! content with), and both spectral embeddings are optimised jointly on the
//! Stiefel manifold with a penalty on cross-collection inconsistency.
//!
//! Pipeline, bottom-up:
//!
//! * [`corpus`]: document model, JSON-Lines parsing, anchor extraction
//! * [`hin`]: per-meta-path path-instance count matrices
//! * [`simmat`]: meta-path similarity and anchor transition matrices
//! * [`spectral`]: Laplacians, k-means, orthonormal initialisation
//! * [`stiefel`]: joint objective and Cayley curvilinear search
//! * [`mutual`]: end-to-end driver, inconsistency, cluster linking
//! * [`eval`]: NMI, pairwise F1, conditional entropy
//! * [`synth`]: planted-partition corpus generator

pub mod corpus;
pub mod error;
pub mod eval;
pub mod hin;
pub mod mutual;
pub mod simmat;
pub mod spectral;
pub mod stiefel;
pub mod synth;

pub use corpus::{extract_anchors, parse_corpus, AnchorSet, CorpusPair, Document, EntityClass, Source};
pub use error::{HintError, Result};
pub use eval::{
    conditional_entropy, conditional_entropy_labels, nmi, pairwise_f1, CondEntropy, MetricReport,
    NmiNorm,
};
pub use hin::{build_count_matrix, CountMatrix, MetaPath, ObjectClass, PathKind};
pub use mutual::{
    harden, inconsistency, link_clusters, run_hint, ClusterLink, ConfidenceMatrix, HintOptions,
    MutualClustering,
};
pub use simmat::{build_similarity, build_transition, hint_similarity, SimMatrix, TransitionMatrix};
pub use spectral::{build_laplacian, init_embedding, kmeans, Embedding, LaplacianBundle};
pub use stiefel::{
    alternating_solve, cayley_step, curvilinear_solve, ObjectiveContext, SearchParams,
    StiefelObjective,
};
pub use synth::{generate, SynthConfig, SynthCorpus};
