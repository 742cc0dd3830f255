//! Classical learners: character n-gram TF-IDF, one-vs-rest linear SVM,
//! multinomial logistic regression and a Gini random forest.

mod forest;
mod linear;
mod sparse;
mod tfidf;

pub use forest::{rf_train, DecisionTree, Forest, ForestConfig, Node, FOREST_KIND};
pub use linear::{
    logreg_train, svm_train, LinearKind, LinearModel, LogRegConfig, SvmConfig, LINEAR_KIND,
};
pub use sparse::{FeatureRow, SparseVector};
pub use tfidf::{char_ngrams, TfidfModel, TFIDF_KIND};
