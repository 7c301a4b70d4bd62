pub mod cli;
pub mod protocols;
pub mod qstate;
pub mod runtime;
pub mod verify;
