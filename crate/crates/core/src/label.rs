//! Switch identifiers and the six-bit fault label.
//!
//! The bridge has three legs. Switches pair up per phase as S1/S2 (A),
//! S3/S4 (B) and S5/S6 (C), the odd one being the upper device.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Phase shift of this phase's fundamental relative to phase A, degrees.
    pub fn shift_deg(self) -> f64 {
        match self {
            Phase::A => 0.0,
            Phase::B => -120.0,
            Phase::C => 120.0,
        }
    }

    pub fn upper(self) -> Switch {
        Switch(2 * self as u8 + 1)
    }

    pub fn lower(self) -> Switch {
        Switch(2 * self as u8 + 2)
    }
}

/// One of the six bridge switches, numbered 1..=6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Switch(u8);

impl Switch {
    pub const ALL: [Switch; 6] = [Switch(1), Switch(2), Switch(3), Switch(4), Switch(5), Switch(6)];

    pub fn new(number: u8) -> Option<Switch> {
        (1..=6).contains(&number).then_some(Switch(number))
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn phase(self) -> Phase {
        Phase::ALL[usize::from((self.0 - 1) / 2)]
    }

    pub fn is_upper(self) -> bool {
        self.0 % 2 == 1
    }

    fn mask(self) -> u8 {
        1 << (6 - self.0)
    }
}

impl fmt::Display for Switch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

impl FromStr for Switch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('S')
            .or_else(|| s.strip_prefix('s'))
            .and_then(|n| n.parse::<u8>().ok())
            .and_then(Switch::new)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown switch {s:?}")))
    }
}

/// Bit vector d1..d6; bit k set means switch Sk is open.
///
/// Stored with d1 as the most significant of six bits, so the derived
/// ordering is the lexicographic order of the printed bitstring and the
/// normal label `000000` sorts first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaultLabel(u8);

impl FaultLabel {
    pub const NORMAL: FaultLabel = FaultLabel(0);

    pub fn from_bits(bits: u8) -> Option<FaultLabel> {
        (bits < 64).then_some(FaultLabel(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn from_switches<I: IntoIterator<Item = Switch>>(switches: I) -> FaultLabel {
        FaultLabel(switches.into_iter().fold(0, |acc, s| acc | s.mask()))
    }

    pub fn single(switch: Switch) -> FaultLabel {
        FaultLabel(switch.mask())
    }

    pub fn is_normal(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, switch: Switch) -> bool {
        self.0 & switch.mask() != 0
    }

    pub fn union(self, other: FaultLabel) -> FaultLabel {
        FaultLabel(self.0 | other.0)
    }

    pub fn intersection(self, other: FaultLabel) -> FaultLabel {
        FaultLabel(self.0 & other.0)
    }

    pub fn is_subset_of(self, other: FaultLabel) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn switches(self) -> impl Iterator<Item = Switch> {
        Switch::ALL.into_iter().filter(move |s| self.contains(*s))
    }

    /// Every label with one or two open switches, preceded by normal.
    /// This is the 22-class composition used for dataset generation.
    pub fn single_and_double_faults() -> Vec<FaultLabel> {
        let mut out = vec![FaultLabel::NORMAL];
        out.extend(Switch::ALL.iter().map(|s| FaultLabel::single(*s)));
        for (i, a) in Switch::ALL.iter().enumerate() {
            for b in &Switch::ALL[i + 1..] {
                out.push(FaultLabel::from_switches([*a, *b]));
            }
        }
        out
    }
}

impl fmt::Display for FaultLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in Switch::ALL {
            f.write_str(if self.contains(s) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for FaultLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 6 {
            return Err(Error::InvalidArgument(format!("fault label {s:?} must have 6 bits")));
        }
        let mut bits = 0u8;
        for c in s.chars() {
            bits <<= 1;
            match c {
                '0' => {}
                '1' => bits |= 1,
                _ => return Err(Error::InvalidArgument(format!("fault label {s:?} is not a bitstring"))),
            }
        }
        Ok(FaultLabel(bits))
    }
}
