//! Error types shared across the crate.

use thiserror::Error;

use crate::ids::{ObservationId, RequestId, SatelliteId, UserId};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid time window [{start}, {end}]")]
    BadWindow { start: f64, end: f64 },
    #[error("unknown satellite `{0}`")]
    UnknownSatellite(SatelliteId),
    #[error("unknown user `{0}`")]
    UnknownUser(UserId),
    #[error("unknown request `{0}`")]
    UnknownRequest(RequestId),
    #[error("unknown observation `{0}`")]
    UnknownObservation(ObservationId),
    #[error("duplicate id `{0}` with differing content")]
    ConflictingRecords(String),
    #[error("instance is inconsistent: {0}")]
    Inconsistent(String),
    #[error("preallocation is not valid on this instance: {0}")]
    InvalidPreallocation(String),
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation parameters: {0}")]
    BadParams(String),
    #[error("scale {scale} outside the declared sweep 0..={max}")]
    ScaleOutOfRange { scale: usize, max: usize },
    #[error("could not place {what} without overlap after {retries} retries")]
    Packing { what: String, retries: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum BusError {
    #[error("unknown recipient `{0}`")]
    UnknownRecipient(UserId),
    #[error("no quiescence after {0} rounds")]
    RoundCapExceeded(u64),
    #[error("payload serialization failed: {0}")]
    Payload(String),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Dcop(#[from] DcopError),
    #[error("award for request `{request}` cannot be merged: {reason}")]
    InfeasibleMerge { request: RequestId, reason: String },
}

#[derive(Debug, Error)]
pub enum DcopError {
    #[error("utility table for variable `{var}` needs {entries} entries, cap is {cap}")]
    MemoryCap { var: String, entries: usize, cap: usize },
    #[error("search space of {0} assignments exceeds the exhaustive cap {1}")]
    ExhaustiveCap(usize, usize),
    #[error("problem is malformed: {0}")]
    Malformed(String),
}
