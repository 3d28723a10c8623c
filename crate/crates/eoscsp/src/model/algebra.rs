//! Sub-problem algebra: restriction to users or requests, the
//! outside-exclusives projection, preallocation, and union.

use crate::error::ModelError;
use crate::ids::{RequestId, SatelliteId, UserId};
use crate::model::{validate_schedule, Instance, Request, Schedule};
use crate::time::{subtract_intervals, TimeWindow};

impl Instance {
    /// Maximal sub-intervals of `s`'s horizon not covered by any exclusive.
    pub fn free_intervals(&self, s: &SatelliteId) -> Vec<TimeWindow> {
        let Some(sat) = self.satellite(s) else {
            return Vec::new();
        };
        let holes: Vec<TimeWindow> = self
            .users()
            .flat_map(|u| u.exclusives_on(s).map(|e| e.window))
            .collect();
        subtract_intervals(sat.horizon, &holes)
    }

    /// The sub-problem holding only `user`'s requests and observations.
    /// Satellites and users are unchanged.
    pub fn restrict_to_user(&self, user: &UserId) -> Result<Instance, ModelError> {
        if self.user(user).is_none() {
            return Err(ModelError::UnknownUser(user.clone()));
        }
        let requests: Vec<Request> = self
            .requests()
            .filter(|r| &r.owner == user)
            .cloned()
            .collect();
        let observations = self
            .observations()
            .filter(|o| &o.owner == user)
            .cloned()
            .collect();
        let fixed = self.filter_fixed(|oid| {
            self.observation(oid).is_some_and(|o| &o.owner == user)
        });
        Instance::with_fixed(
            self.satellites().cloned().collect(),
            self.users().cloned().collect(),
            requests,
            observations,
            fixed,
        )
    }

    /// The sub-problem holding only `request` and its opportunities.
    pub fn restrict_to_request(&self, request: &RequestId) -> Result<Instance, ModelError> {
        let Some(r) = self.request(request) else {
            return Err(ModelError::UnknownRequest(request.clone()));
        };
        let observations = self
            .observations()
            .filter(|o| &o.request == request)
            .cloned()
            .collect();
        let fixed = self.filter_fixed(|oid| {
            self.observation(oid).is_some_and(|o| &o.request == request)
        });
        Instance::with_fixed(
            self.satellites().cloned().collect(),
            self.users().cloned().collect(),
            vec![r.clone()],
            observations,
            fixed,
        )
    }

    /// Keeps an open observation only if its window overlaps some
    /// exclusive-free part of its satellite's horizon long enough to fit its
    /// duration; keeps a request only while it retains at least one
    /// opportunity. Fixed placements and their records always survive: they
    /// are commitments, not candidates.
    pub fn outside_exclusives(&self) -> Instance {
        let keep_obs: Vec<_> = self
            .observations()
            .filter(|o| {
                if self.fixed().start_of(&o.id).is_some() {
                    return true;
                }
                self.free_intervals(&o.satellite).iter().any(|f| {
                    f.intersect(&o.window)
                        .is_some_and(|overlap| overlap.fits(o.duration))
                })
            })
            .cloned()
            .collect();

        let requests: Vec<Request> = self
            .requests()
            .filter_map(|r| {
                let opportunities: Vec<_> = r
                    .opportunities
                    .iter()
                    .filter(|o| keep_obs.iter().any(|k| &&k.id == o))
                    .cloned()
                    .collect();
                if opportunities.is_empty() {
                    None
                } else {
                    Some(Request {
                        opportunities,
                        ..r.clone()
                    })
                }
            })
            .collect();

        Instance::with_fixed(
            self.satellites().cloned().collect(),
            self.users().cloned().collect(),
            requests,
            keep_obs,
            self.fixed().clone(),
        )
        .expect("projection of a valid instance stays valid")
    }

    /// Returns this instance with `m` merged into its fixed placements.
    /// Solvers on the result treat those entries as immovable: they consume
    /// capacity, occupy track intervals, and close their requests.
    pub fn with_preallocation(&self, m: &Schedule) -> Result<Instance, ModelError> {
        let verdict = validate_schedule(self, m);
        if !verdict.is_ok() {
            return Err(ModelError::InvalidPreallocation(verdict.to_string()));
        }
        let mut fixed = self.fixed().clone();
        fixed.absorb(m)?;
        Instance::with_fixed(
            self.satellites().cloned().collect(),
            self.users().cloned().collect(),
            self.requests().cloned().collect(),
            self.observations().cloned().collect(),
            fixed,
        )
    }

    /// Componentwise set union. Shared ids must denote identical records.
    pub fn union(&self, other: &Instance) -> Result<Instance, ModelError> {
        fn merge<T: Clone + PartialEq, I: Iterator<Item = T>>(
            base: I,
            extra: I,
            id_of: impl Fn(&T) -> String,
        ) -> Result<Vec<T>, ModelError> {
            let mut merged: Vec<T> = base.collect();
            for item in extra {
                match merged.iter().find(|m| id_of(m) == id_of(&item)) {
                    Some(existing) if existing != &item => {
                        return Err(ModelError::ConflictingRecords(id_of(&item)));
                    }
                    Some(_) => {}
                    None => merged.push(item),
                }
            }
            Ok(merged)
        }

        let satellites = merge(self.satellites(), other.satellites(), |s| s.id.to_string())?;
        let users = merge(self.users(), other.users(), |u| u.id.to_string())?;
        let requests = merge(self.requests(), other.requests(), |r| r.id.to_string())?;
        let observations = merge(self.observations(), other.observations(), |o| {
            o.id.to_string()
        })?;
        let mut fixed = self.fixed().clone();
        fixed.absorb(other.fixed())?;
        Instance::with_fixed(
            satellites.into_iter().cloned().collect(),
            users.into_iter().cloned().collect(),
            requests.into_iter().cloned().collect(),
            observations.into_iter().cloned().collect(),
            fixed,
        )
    }

    fn filter_fixed(&self, keep: impl Fn(&crate::ids::ObservationId) -> bool) -> Schedule {
        let mut out = Schedule::new();
        for (o, t) in self.fixed().entries() {
            if keep(o) {
                out.insert(o.clone(), t);
            }
        }
        for g in self.fixed().grants() {
            if keep(&g.observation) {
                out.add_grant(g.observation.clone(), g.granted_by.clone());
            }
        }
        out
    }
}
