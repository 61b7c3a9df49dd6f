//! Nearest-neighbour dot pairs of the five-dot line and the brickwork slot layout.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of slots in the brickwork sequence.
pub const SLOT_COUNT: usize = 20;

/// 1-based slot that only exists to keep the brickwork numbering regular.
pub const PLACEHOLDER_SLOT: usize = 19;

/// An exchange coupling between two neighbouring dots (1-based dot labels,
/// Q1 Q2 Q3 A1 A2 from left to right).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Link {
    L12,
    L23,
    L34,
    L45,
}

impl Link {
    pub const ALL: [Link; 4] = [Link::L12, Link::L23, Link::L34, Link::L45];

    /// Build a link from 1-based dot labels.
    pub fn from_dots(i: usize, j: usize) -> Result<Link> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        match (a, b) {
            (1, 2) => Ok(Link::L12),
            (2, 3) => Ok(Link::L23),
            (3, 4) => Ok(Link::L34),
            (4, 5) => Ok(Link::L45),
            _ => Err(Error::invalid(format!(
                "dots ({i},{j}) are not a nearest-neighbour pair of the five-dot line"
            ))),
        }
    }

    /// 1-based dot labels.
    pub fn dots(self) -> (usize, usize) {
        match self {
            Link::L12 => (1, 2),
            Link::L23 => (2, 3),
            Link::L34 => (3, 4),
            Link::L45 => (4, 5),
        }
    }

    /// 0-based indices into the product basis ordering.
    pub fn sites(self) -> (usize, usize) {
        let (a, b) = self.dots();
        (a - 1, b - 1)
    }

    pub fn is_disjoint(self, other: Link) -> bool {
        let (a, b) = self.dots();
        let (c, d) = other.dots();
        a != c && a != d && b != c && b != d
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.dots();
        write!(f, "{a}{b}")
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits: Vec<usize> = s
            .chars()
            .filter(|c| c.is_ascii_digit())
            .map(|c| c as usize - '0' as usize)
            .collect();
        match digits.as_slice() {
            [i, j] => Link::from_dots(*i, *j),
            _ => Err(Error::invalid(format!("cannot parse link {s:?}"))),
        }
    }
}

/// Link driven by the 1-based slot `k` of the brickwork.
///
/// Slots are applied in increasing order (slot 1 acts first). Each pair of
/// consecutive slots `{2l+1, 2l+2}` forms one brickwork layer on disjoint links.
pub fn slot_link(k: usize) -> Link {
    assert!((1..=SLOT_COUNT).contains(&k), "slot {k} out of range");
    match k % 4 {
        1 => Link::L34,
        2 => Link::L12,
        3 => Link::L45,
        _ => Link::L23,
    }
}

/// Checks that every brickwork layer pairs two commuting (disjoint) links and that
/// the layers alternate between the two layer types.
pub fn validate_layout() -> Result<()> {
    for layer in 0..SLOT_COUNT / 2 {
        let a = slot_link(2 * layer + 1);
        let b = slot_link(2 * layer + 2);
        if !a.is_disjoint(b) {
            return Err(Error::invalid(format!(
                "layer {} pairs overlapping links {a} and {b}",
                layer + 1
            )));
        }
        if layer > 0 {
            let prev = slot_link(2 * layer);
            if prev.is_disjoint(a) && prev.is_disjoint(b) {
                return Err(Error::invalid(format!(
                    "layer {} does not interleave with the previous layer",
                    layer + 1
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_valid() {
        validate_layout().unwrap();
    }

    #[test]
    fn last_layer_matches_printed_ordering() {
        assert_eq!(slot_link(20), Link::L23);
        assert_eq!(slot_link(19), Link::L45);
        assert_eq!(slot_link(18), Link::L12);
        assert_eq!(slot_link(17), Link::L34);
        assert_eq!(slot_link(1), Link::L34);
        assert_eq!(slot_link(2), Link::L12);
    }

    #[test]
    fn link_parsing() {
        assert_eq!("23".parse::<Link>().unwrap(), Link::L23);
        assert_eq!("(4,5)".parse::<Link>().unwrap(), Link::L45);
        assert!(Link::from_dots(1, 3).is_err());
        assert!(Link::from_dots(2, 1).is_ok());
    }
}
