//! Fog node: receives physiological recordings over mutual TLS, reduces
//! them to feature records with `fog-core`, and forwards only the records
//! upstream.

pub mod auth;
pub mod bench;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod faults;
pub mod ingest;
pub mod io;
pub mod mock_cloud;
pub mod node;
pub mod plotdata;
pub mod pool;
pub mod protocol;
pub mod records;
pub mod retention;
pub mod store;
pub mod sync;
pub mod tls;

pub use error::{NodeError, Result};
