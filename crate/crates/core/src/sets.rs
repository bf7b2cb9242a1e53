//! Origins, capabilities and the small bitsets that hold them.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::marker::PhantomData;

pub trait Member: Copy + Eq + fmt::Debug + 'static {
    const ALL: &'static [Self];
    fn index(self) -> u32;
    fn name(self) -> &'static str;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Stdin,
    Stdout,
    Stderr,
    File,
    Pipe,
}

impl Member for Origin {
    const ALL: &'static [Self] = &[Origin::Stdin, Origin::Stdout, Origin::Stderr, Origin::File, Origin::Pipe];
    fn index(self) -> u32 {
        self as u32
    }
    fn name(self) -> &'static str {
        match self {
            Origin::Stdin => "stdin",
            Origin::Stdout => "stdout",
            Origin::Stderr => "stderr",
            Origin::File => "file",
            Origin::Pipe => "pipe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Capability {
    Read,
    BufRead,
    Write,
    Seek,
    Close,
}

impl Member for Capability {
    const ALL: &'static [Self] =
        &[Capability::Read, Capability::BufRead, Capability::Write, Capability::Seek, Capability::Close];
    fn index(self) -> u32 {
        self as u32
    }
    fn name(self) -> &'static str {
        match self {
            Capability::Read => "read",
            Capability::BufRead => "bufread",
            Capability::Write => "write",
            Capability::Seek => "seek",
            Capability::Close => "close",
        }
    }
}

/// A set over a small enum, at most 32 members.
pub struct Set<T> {
    bits: u32,
    _m: PhantomData<T>,
}

pub type OriginSet = Set<Origin>;
pub type CapSet = Set<Capability>;

impl<T> Clone for Set<T> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<T> Copy for Set<T> {}
impl<T> PartialEq for Set<T> {
    fn eq(&self, other: &Self) -> bool {
        self.bits == other.bits
    }
}
impl<T> Eq for Set<T> {}
impl<T> std::hash::Hash for Set<T> {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.bits.hash(state)
    }
}
impl<T> Default for Set<T> {
    fn default() -> Self {
        Set { bits: 0, _m: PhantomData }
    }
}

impl<T: Member> Set<T> {
    pub const fn empty() -> Self {
        Set { bits: 0, _m: PhantomData }
    }

    pub fn from_bits(bits: u32) -> Self {
        let mask = (1u32 << T::ALL.len()) - 1;
        Set { bits: bits & mask, _m: PhantomData }
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn full() -> Self {
        Self::from_bits(u32::MAX)
    }

    pub fn of(items: &[T]) -> Self {
        let mut s = Self::empty();
        for &i in items {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, item: T) -> bool {
        let b = 1 << item.index();
        let fresh = self.bits & b == 0;
        self.bits |= b;
        fresh
    }

    pub fn remove(&mut self, item: T) {
        self.bits &= !(1 << item.index());
    }

    pub fn contains(self, item: T) -> bool {
        self.bits & (1 << item.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    pub fn len(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn union(self, other: Self) -> Self {
        Set { bits: self.bits | other.bits, _m: PhantomData }
    }

    pub fn intersect(self, other: Self) -> Self {
        Set { bits: self.bits & other.bits, _m: PhantomData }
    }

    pub fn minus(self, other: Self) -> Self {
        Set { bits: self.bits & !other.bits, _m: PhantomData }
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.bits & !other.bits == 0
    }

    /// Adds `other` in place and reports whether anything changed.
    pub fn absorb(&mut self, other: Self) -> bool {
        let before = self.bits;
        self.bits |= other.bits;
        self.bits != before
    }

    /// Members in canonical declaration order.
    pub fn iter(self) -> impl Iterator<Item = T> {
        T::ALL.iter().copied().filter(move |m| self.contains(*m))
    }

    pub fn names(self) -> Vec<&'static str> {
        self.iter().map(T::name).collect()
    }

    pub fn single(self) -> Option<T> {
        if self.len() == 1 {
            self.iter().next()
        } else {
            None
        }
    }
}

impl<T: Member> fmt::Debug for Set<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.names().join(","))
    }
}

impl<T: Member> fmt::Display for Set<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl<T: Member> FromIterator<T> for Set<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut s = Self::empty();
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl<T: Member> Serialize for Set<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.names())
    }
}

impl<'de, T: Member> Deserialize<'de> for Set<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        let mut s = Self::empty();
        for n in names {
            let m = T::ALL
                .iter()
                .find(|m| m.name() == n)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown member `{n}`")))?;
            s.insert(*m);
        }
        Ok(s)
    }
}

/// Capabilities each origin can ever provide.
pub fn origin_provides(o: Origin) -> CapSet {
    use Capability::*;
    match o {
        Origin::Stdin => CapSet::of(&[Read, BufRead, Close]),
        Origin::Stdout | Origin::Stderr => CapSet::of(&[Write, Close]),
        Origin::File => CapSet::full(),
        Origin::Pipe => CapSet::of(&[Read, Write, Close]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_and_json() {
        let s = CapSet::of(&[Capability::Seek, Capability::Read]);
        assert_eq!(s.names(), vec!["read", "seek"]);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"["read","seek"]"#);
        let back: CapSet = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn close_is_universal_and_seek_file_only() {
        for &o in Origin::ALL {
            assert!(origin_provides(o).contains(Capability::Close));
            assert_eq!(origin_provides(o).contains(Capability::Seek), o == Origin::File);
        }
    }

    #[test]
    fn absorb_reports_change() {
        let mut a = OriginSet::of(&[Origin::File]);
        assert!(!a.absorb(OriginSet::of(&[Origin::File])));
        assert!(a.absorb(OriginSet::of(&[Origin::Pipe])));
        assert_eq!(a.len(), 2);
    }
}
