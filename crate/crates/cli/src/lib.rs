//! Command-line front end for `chatter-core`: JSON/CSV input and output,
//! run manifests and the seeded identity suites.

pub mod error;
pub mod identities;
pub mod input;
pub mod manifest;
pub mod output;
