//! Siphons, traps and the siphon–trap liveness test for free-choice nets.
//!
//! Place sets are bit masks, which is why the test refuses nets with more
//! than [`MAX_SIPHON_PLACES`] places.

use std::collections::HashSet;

use crate::net::{PetriNet, PlaceId};

use super::AnalysisError;

pub const MAX_SIPHON_PLACES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiphonTrapReport {
    /// A minimal siphon that contains no initially marked trap.
    pub violating_siphon: Option<Vec<PlaceId>>,
    /// Number of minimal siphons examined.
    pub checked_siphons: usize,
}

impl SiphonTrapReport {
    pub fn is_live(&self) -> bool {
        self.violating_siphon.is_none()
    }
}

fn members(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |i| mask & (1 << i) != 0)
}

pub fn to_places(mask: u32) -> Vec<PlaceId> {
    members(mask).map(PlaceId).collect()
}

pub fn mask_of(places: &[PlaceId]) -> u32 {
    places.iter().fold(0, |m, p| m | 1 << p.0)
}

/// `•S ⊆ S•`: every transition producing into `S` also consumes from `S`.
pub fn is_siphon(net: &PetriNet, mask: u32) -> bool {
    mask != 0
        && members(mask).all(|p| {
            net.producers(PlaceId(p))
                .iter()
                .all(|&t| net.inputs(t).iter().any(|q| mask & (1 << q.0) != 0))
        })
}

/// `S• ⊆ •S`: every transition consuming from `S` also produces into `S`.
pub fn is_trap(net: &PetriNet, mask: u32) -> bool {
    mask != 0
        && members(mask).all(|p| {
            net.consumers(PlaceId(p))
                .iter()
                .all(|&t| net.outputs(t).iter().any(|q| mask & (1 << q.0) != 0))
        })
}

/// Largest trap contained in `mask` (0 if there is none).
pub fn maximal_trap_within(net: &PetriNet, mask: u32) -> u32 {
    let mut trap = mask;
    loop {
        let leaking = members(trap).find(|&p| {
            net.consumers(PlaceId(p))
                .iter()
                .any(|&t| net.outputs(t).iter().all(|q| trap & (1 << q.0) == 0))
        });
        match leaking {
            Some(p) => trap &= !(1 << p),
            None => return trap,
        }
    }
}

/// All inclusion-minimal siphons, ordered by size then by members.
///
/// For each place a branching search grows a candidate set by repairing the
/// first transition that feeds the set without consuming from it. Every
/// minimal siphon containing the start place is found on the branch that only
/// picks its own members.
pub fn minimal_siphons(net: &PetriNet) -> Result<Vec<u32>, AnalysisError> {
    let n = net.place_count();
    if n > MAX_SIPHON_PLACES {
        return Err(AnalysisError::TooLarge {
            places: n,
            max: MAX_SIPHON_PLACES,
        });
    }
    let mut found: HashSet<u32> = HashSet::new();
    let mut visited: HashSet<u32> = HashSet::new();
    for start in 0..n {
        let mut stack = vec![1u32 << start];
        while let Some(set) = stack.pop() {
            if !visited.insert(set) {
                continue;
            }
            let unrepaired = members(set)
                .flat_map(|p| net.producers(PlaceId(p)).iter().copied())
                .find(|&t| net.inputs(t).iter().all(|q| set & (1 << q.0) == 0));
            match unrepaired {
                None => {
                    found.insert(set);
                }
                Some(t) => {
                    for q in net.inputs(t) {
                        stack.push(set | 1 << q.0);
                    }
                }
            }
        }
    }
    let mut minimal: Vec<u32> = found
        .iter()
        .copied()
        .filter(|&s| !found.iter().any(|&o| o != s && o & s == o))
        .collect();
    minimal.sort_by_key(|&s| (s.count_ones(), to_places(s)));
    Ok(minimal)
}

/// Liveness of a free-choice net: every siphon must contain a trap that is
/// marked initially. Checking minimal siphons suffices.
pub fn commoner_live(net: &PetriNet) -> Result<SiphonTrapReport, AnalysisError> {
    if !net.classify().is_free_choice {
        return Err(AnalysisError::NotFreeChoice);
    }
    let siphons = minimal_siphons(net)?;
    let m0 = net.initial_marking();
    for (i, &siphon) in siphons.iter().enumerate() {
        let trap = maximal_trap_within(net, siphon);
        if !members(trap).any(|p| m0[PlaceId(p)] > 0) {
            return Ok(SiphonTrapReport {
                violating_siphon: Some(to_places(siphon)),
                checked_siphons: i + 1,
            });
        }
    }
    Ok(SiphonTrapReport {
        violating_siphon: None,
        checked_siphons: siphons.len(),
    })
}
