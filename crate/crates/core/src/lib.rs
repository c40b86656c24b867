//! Actuator and sensor placement for linear systems by maximizing scalar
//! metrics of the controllability Gramian.
//!
//! ```
//! use ctrlplace::{build_cache, solve, Algorithm, CandidateSet, Horizon, MetricKind, MetricSpec,
//!                 SelectionProblem, SystemModel};
//! use nalgebra::DMatrix;
//!
//! let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0, -3.0]));
//! let model = SystemModel::new(a).unwrap();
//! let cache = build_cache(&model, &CandidateSet::unit_vectors(3), Horizon::Infinite).unwrap();
//! let problem = SelectionProblem::new(&cache, MetricSpec::new(MetricKind::LogDet), 2, *model.tolerances()).unwrap();
//! let result = solve(&problem, Algorithm::Greedy).unwrap();
//! assert_eq!(result.chosen, vec![0, 1]);
//! ```

pub mod centrality;
pub mod config;
pub mod error;
pub mod experiment;
pub mod gramian;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod selection;
pub mod systems;
pub mod verify;

pub use centrality::{centrality, CentralityMeasure, CentralityReport};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use gramian::{build_cache, CandidateSet, GramianCache, Horizon, SystemModel};
pub use linalg::{DenseMatrix, Tolerances};
pub use metrics::{ExtReal, MetricKind, MetricSpec, MetricValue, SingularPolicy};
pub use selection::{solve, Algorithm, SelectionProblem, SelectionResult};
