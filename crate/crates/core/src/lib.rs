//! Semi-supervised learning for just-in-time software defect prediction.
//!
//! The crate bundles three layers:
//!
//! * data handling ([`dataset`], [`balance`]) for process-metric tables,
//! * learners: six supervised base classifiers ([`learners`]) and the
//!   semi-supervised catalog built on top of them ([`ssl`]),
//! * evaluation: metrics ([`metrics`]), Scott-Knott ranking
//!   ([`scott_knott`]) and the experiment [`harness`].

pub mod balance;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod metrics;
pub mod scott_knott;
pub mod seed;
pub mod ssl;

pub use error::{Error, Result};
pub use learners::{Classifier, ClassifierSpec, Label, Learner, LearnerKind, TrainedClassifier};
