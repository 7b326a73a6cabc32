use std::fmt;

use serde::Serialize;

/// Vehicle lifecycle states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Lifecycle {
    Idle,
    EnRoute,
    Dwelling,
    Returning,
    QueuedAtStation,
    Charging,
    Stranded,
}

impl Lifecycle {
    pub const ALL: [Lifecycle; 7] = [
        Lifecycle::Idle,
        Lifecycle::EnRoute,
        Lifecycle::Dwelling,
        Lifecycle::Returning,
        Lifecycle::QueuedAtStation,
        Lifecycle::Charging,
        Lifecycle::Stranded,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Lifecycle::Idle => "idle",
            Lifecycle::EnRoute => "en_route",
            Lifecycle::Dwelling => "dwelling",
            Lifecycle::Returning => "returning",
            Lifecycle::QueuedAtStation => "queued",
            Lifecycle::Charging => "charging",
            Lifecycle::Stranded => "stranded",
        }
    }

    pub fn is_driving(&self) -> bool {
        matches!(self, Lifecycle::EnRoute | Lifecycle::Returning)
    }

    /// Applies one lifecycle input, or reports the illegal combination.
    pub fn next(self, input: LifecycleInput) -> Result<Lifecycle, IllegalTransition> {
        use Lifecycle::*;
        use LifecycleInput as I;
        let to = match (self, input) {
            (Idle, I::Dispatched) => EnRoute,
            (EnRoute, I::ArriveDestination) => Dwelling,
            (Dwelling, I::DwellComplete) => Returning,
            (Returning, I::ArriveDepot { needs_charge: false }) => Idle,
            (Returning, I::ArriveDepot { needs_charge: true }) => Returning,
            (Returning, I::ArriveStation) => Returning,
            (Returning, I::Queued) => QueuedAtStation,
            (Returning | QueuedAtStation, I::SlotGranted) => Charging,
            (Charging, I::ChargeComplete { at_depot: true }) => Idle,
            (Charging, I::ChargeComplete { at_depot: false }) => Returning,
            (EnRoute | Returning, I::Stranded) => Stranded,
            (from, input) => return Err(IllegalTransition { from, input }),
        };
        Ok(to)
    }
}

impl fmt::Display for Lifecycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifecycleInput {
    Dispatched,
    ArriveDestination,
    DwellComplete,
    ArriveDepot { needs_charge: bool },
    ArriveStation,
    Queued,
    SlotGranted,
    ChargeComplete { at_depot: bool },
    Stranded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("illegal transition: {from} cannot accept {input:?}")]
pub struct IllegalTransition {
    pub from: Lifecycle,
    pub input: LifecycleInput,
}

#[cfg(test)]
mod tests {
    use super::*;
    use Lifecycle::*;
    use LifecycleInput as I;

    #[test]
    fn nominal_round_trip() {
        let mut s = Idle;
        for input in [
            I::Dispatched,
            I::ArriveDestination,
            I::DwellComplete,
            I::ArriveDepot { needs_charge: true },
            I::Queued,
            I::SlotGranted,
            I::ChargeComplete { at_depot: true },
        ] {
            s = s.next(input).unwrap();
        }
        assert_eq!(s, Idle);
        assert_eq!(EnRoute.next(I::ArriveDestination).unwrap(), Dwelling);
    }

    #[test]
    fn illegal_edges() {
        assert!(Charging.next(I::DwellComplete).is_err());
        assert!(Dwelling.next(I::Stranded).is_err());
        for input in [I::Dispatched, I::ArriveDestination, I::DwellComplete, I::SlotGranted, I::Stranded] {
            assert!(Stranded.next(input).is_err(), "stranded is terminal");
        }
    }
}
