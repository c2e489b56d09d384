//! Headless front ends for `tmatch-core`: a persistent [`workspace`], the
//! HTTP [`api`] served over it, and the [`cli`].

pub mod api;
pub mod cli;
pub mod workspace;

pub use workspace::{SeedChoice, SessionRecord, SessionState, Workspace, WorkspaceConfig, WorkspaceError};
