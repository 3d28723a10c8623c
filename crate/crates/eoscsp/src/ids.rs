//! String-backed identifier newtypes.
//!
//! Ids are ordered lexicographically; that order is the tie-break used by
//! every solver, so identical inputs always yield identical outputs.

use serde::{Deserialize, Serialize};
use std::fmt;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_type!(
    /// Identifier of a satellite.
    SatelliteId
);
id_type!(
    /// Identifier of a user (exclusive owner or the central planner).
    UserId
);
id_type!(
    /// Identifier of an observation request.
    RequestId
);
id_type!(
    /// Identifier of a single observation opportunity.
    ObservationId
);
