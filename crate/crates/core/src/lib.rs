//! B-slack trees: leaf-oriented search trees that keep worst-case space
//! close to optimal by bounding the slack shared between siblings.
//!
//! [`Tree`] is the relaxed tree with its rebalancing scheduler,
//! [`checker`] audits trees, [`analysis`] computes the worst-case space
//! quantities and [`harness`] runs randomized trials.
//!
//! ```
//! use bslack::checker::{validate, Mode};
//! use bslack::{Config, Policy, Tree};
//!
//! let mut t = Tree::new(Config::new(16).policy(Policy::Standard)).unwrap();
//! for k in 0..10_000u64 {
//!     t.insert(k, k * 2);
//! }
//! t.delete(&17);
//! assert_eq!(t.get(&18), Some(&36));
//! assert!(validate(&t, Mode::Strict).is_strict());
//! ```

pub mod analysis;
pub mod checker;
mod dump;
pub mod harness;
mod node;
pub mod rng;
mod steps;
mod tree;

pub use dump::{parse_dump, DumpError};
pub use node::{NodeId, NodeRef};
pub use steps::{even_split, StepError};
pub use tree::{
    Config, ConfigError, DeleteOutcome, EventKind, InsertOutcome, InsertStatus, Iter, Policy, RebalanceStep, Schedule,
    Shape, SlackRule, StepCounts, StepKind, TraceEvent, Tree, TreeStats, DEFAULT_QUEUE_CAPACITY,
};
