//! Dimensionality reduction and the two recognition schemes.

mod file;
mod knn;
mod pca;
mod svm;

pub use file::{read_model, write_model, Classifier, ModelFile, MAGIC};
pub use knn::{knn_identify, knn_verify, Gallery};
pub use pca::{covariance, fit_pca, symmetric_eigen, PcaModel};
pub use svm::{hinge_objective, svm_score, train_svm, SvmModel};
