//! The successor function on the grid, its rank function, and fast
//! rank <-> coordinate conversion.
//!
//! The enumeration starts at (0,0), descends even columns and ascends odd
//! ones, and turns at depths derived from an increasing parameter list
//! b_1 < b_2 < ... with 2b_k + 1 < b_{k+1}. Walking the turn rules once
//! yields a table of straight segments; conversions are then binary
//! searches over segment start ranks instead of stepwise iteration.
//!
//! A geometry is either closed (the list is complete, the final descent
//! down column 0 runs forever) or open with a floor F (any future b is
//! promised to be >= F, so ranks of cells at depth <= F are already
//! stable). Queries that would depend on an unfixed b fail with
//! `HorizonExceeded`.
//!
//! The list is indexed from b_1; no b_0 exists because none of the turn
//! rules ever consults one.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::vector::{Coord, Rank};

/// Completion state of the parameter list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extension {
    /// No further b will ever be appended.
    Closed,
    /// Any future b is promised to be >= the floor.
    Open(BigUint),
}

/// Validated increasing parameter list b_1 < b_2 < ... with 2b_k+1 < b_{k+1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BList {
    bs: Vec<BigUint>,
    extension: Extension,
}

impl BList {
    pub fn new(bs: Vec<BigUint>, extension: Extension) -> Result<Self> {
        if let Some(first) = bs.first() {
            if first.is_zero() {
                return Err(Error::InvalidParameter("b_1 must be at least 1".into()));
            }
        }
        for w in bs.windows(2) {
            if (&w[0] << 1u32) + 1u32 >= w[1] {
                return Err(Error::InvalidParameter(format!(
                    "b sequence must satisfy 2b+1 < b': got {} before {}",
                    w[0], w[1]
                )));
            }
        }
        if let Extension::Open(f) = &extension {
            if let Some(last) = bs.last() {
                if *f < (last << 1u32) + 2u32 {
                    return Err(Error::InvalidParameter(format!(
                        "extension floor {} is below the forced bound 2*{}+2",
                        f,
                        last
                    )));
                }
            }
        }
        Ok(BList { bs, extension })
    }

    pub fn closed(bs: Vec<BigUint>) -> Result<Self> {
        BList::new(bs, Extension::Closed)
    }

    pub fn closed_u64(bs: &[u64]) -> Result<Self> {
        BList::closed(bs.iter().map(|&b| BigUint::from(b)).collect())
    }

    pub fn values(&self) -> &[BigUint] {
        &self.bs
    }

    pub fn extension(&self) -> &Extension {
        &self.extension
    }

    /// Smallest depth at which a guard could involve an unknown future b.
    /// `None` means the list is closed and every guard is decidable.
    fn guard_floor(&self) -> Option<BigUint> {
        match &self.extension {
            Extension::Closed => None,
            Extension::Open(f) => Some(f.clone()),
        }
    }

    fn index_of_b(&self, i: &BigUint) -> Option<usize> {
        self.bs.binary_search(i).ok().map(|k| k + 1)
    }

    /// 1-based n with i = b_n, if any.
    fn match_b(&self, i: &BigUint) -> Option<usize> {
        self.index_of_b(i)
    }

    /// 1-based n with i = 2b_n + 1.
    fn match_2b1(&self, i: &BigUint) -> Option<usize> {
        if i.is_even() || i.is_one() {
            return None;
        }
        self.index_of_b(&((i - 1u32) >> 1u32))
    }

    /// 1-based n with i = b_n + 1.
    fn match_b1(&self, i: &BigUint) -> Option<usize> {
        if i.is_zero() {
            return None;
        }
        self.index_of_b(&(i - 1u32))
    }

    /// 1-based n with i = 2b_n.
    fn match_2b(&self, i: &BigUint) -> Option<usize> {
        if i.is_odd() || i.is_zero() {
            return None;
        }
        self.index_of_b(&(i >> 1u32))
    }
}

trait Parity {
    fn is_even(&self) -> bool;
    fn is_odd(&self) -> bool;
}

impl Parity for BigUint {
    fn is_even(&self) -> bool {
        !self.bit(0)
    }
    fn is_odd(&self) -> bool {
        self.bit(0)
    }
}

/// The successor of (i, j) under the turn rules. The five special guards
/// are mutually exclusive for a valid list; this is asserted at runtime so
/// that a mis-entered sequence is detected immediately.
pub fn next(c: &Coord, b: &BList) -> Result<Coord> {
    if let Some(floor) = b.guard_floor() {
        if c.i >= floor {
            return Err(Error::HorizonExceeded(format!(
                "successor of {} depends on b values not yet fixed (floor {})",
                c, floor
            )));
        }
    }
    let i = &c.i;
    let j = &c.j;
    let two_n = |n: usize| BigUint::from(2 * n);

    let g1 = b.match_b(i).filter(|&n| j.is_even() && *j < two_n(n));
    let g2 = b
        .match_2b1(i)
        .filter(|&n| j.is_odd() && !j.is_zero() && *j <= two_n(n));
    let g3 = i.is_zero() && j.is_odd();
    let g4 = b.match_b1(i).filter(|&n| j.is_odd() && *j < two_n(n));
    let g5 = b
        .match_2b(i)
        .filter(|&n| j.is_even() && !j.is_zero() && *j <= two_n(n));

    let hits = [g1.is_some(), g2.is_some(), g3, g4.is_some(), g5.is_some()];
    assert!(
        hits.iter().filter(|&&h| h).count() <= 1,
        "overlapping successor guards at {c}: the b sequence is invalid"
    );

    let up = |c: &Coord| Coord { i: c.i.clone(), j: &c.j + 1u32 };
    let down = |c: &Coord| Coord { i: c.i.clone(), j: &c.j - 1u32 };
    if g1.is_some() || g3 {
        return Ok(up(c));
    }
    if g2.is_some() {
        return Ok(up(c));
    }
    if g4.is_some() || g5.is_some() {
        return Ok(down(c));
    }
    Ok(if j.is_even() {
        Coord { i: i + 1u32, j: j.clone() }
    } else {
        Coord { i: i - 1u32, j: j.clone() }
    })
}

/// A maximal straight run of the path inside one column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub column: BigUint,
    /// Depth of the first cell of the run.
    pub start_depth: BigUint,
    pub descending: bool,
    /// Number of cells covered.
    pub len: BigUint,
    pub start_rank: Rank,
}

impl Segment {
    fn end_rank(&self) -> Rank {
        &self.start_rank + &self.len
    }

    fn contains_depth(&self, depth: &BigUint) -> bool {
        if self.descending {
            *depth >= self.start_depth && depth - &self.start_depth < self.len
        } else {
            *depth <= self.start_depth && &self.start_depth - depth < self.len
        }
    }

    fn rank_of_depth(&self, depth: &BigUint) -> Rank {
        debug_assert!(self.contains_depth(depth));
        if self.descending {
            &self.start_rank + (depth - &self.start_depth)
        } else {
            &self.start_rank + (&self.start_depth - depth)
        }
    }

    fn depth_of_rank(&self, k: &Rank) -> BigUint {
        let off = k - &self.start_rank;
        debug_assert!(off < self.len);
        if self.descending {
            &self.start_depth + off
        } else {
            &self.start_depth - off
        }
    }
}

/// Segment table for one parameter list, plus the open column-0 descent
/// that follows the last detour loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageGeometry {
    blist: BList,
    segments: Vec<Segment>,
    tail_depth: BigUint,
    tail_rank: Rank,
    /// Cumulative extra path length contributed by the loops at b_1..b_k.
    cum_detours: Vec<BigUint>,
}

impl StageGeometry {
    pub fn new(blist: BList) -> Self {
        let (segments, tail_depth, tail_rank) = walk(&blist);
        let mut geom = StageGeometry {
            blist,
            segments,
            tail_depth,
            tail_rank,
            cum_detours: Vec::new(),
        };
        let mut cum = Vec::with_capacity(geom.blist.bs.len());
        for b in geom.blist.bs.clone() {
            let rejoin = &b + 1u32;
            let rank = geom
                .rank_of_coord_unchecked(&Coord { i: rejoin.clone(), j: BigUint::zero() })
                .expect("rejoin cell must be on the walked path");
            cum.push(rank - rejoin);
        }
        geom.cum_detours = cum;
        geom
    }

    pub fn blist(&self) -> &BList {
        &self.blist
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Extra path length of the loop at b_k (1-based k).
    pub fn detour(&self, k: usize) -> BigUint {
        assert!(k >= 1 && k <= self.cum_detours.len());
        if k == 1 {
            self.cum_detours[0].clone()
        } else {
            &self.cum_detours[k - 1] - &self.cum_detours[k - 2]
        }
    }

    /// Largest depth on column 0 whose rank is already stable, if bounded.
    pub fn depth_floor(&self) -> Option<&BigUint> {
        match self.blist.extension() {
            Extension::Closed => None,
            Extension::Open(f) => Some(f),
        }
    }

    /// Largest rank (inclusive) servable by rank_to_coord, if bounded.
    pub fn rank_horizon(&self) -> Option<Rank> {
        self.depth_floor().map(|f| &self.tail_rank + (f - &self.tail_depth))
    }

    fn check_depth(&self, x: &BigUint) -> Result<()> {
        if let Some(f) = self.depth_floor() {
            if x > f {
                return Err(Error::HorizonExceeded(format!(
                    "column-0 depth {} is beyond the committed floor {}",
                    x, f
                )));
            }
        }
        Ok(())
    }

    /// The coordinate visited at rank k.
    pub fn rank_to_coord(&self, k: &Rank) -> Result<Coord> {
        if let Some(h) = self.rank_horizon() {
            if *k > h {
                return Err(Error::HorizonExceeded(format!(
                    "rank {} is beyond the committed horizon (largest valid rank {})",
                    k, h
                )));
            }
        }
        if *k >= self.tail_rank {
            return Ok(Coord { i: &self.tail_depth + (k - &self.tail_rank), j: BigUint::zero() });
        }
        let idx = self.segments.partition_point(|s| s.start_rank <= *k);
        let seg = &self.segments[idx - 1];
        debug_assert!(*k < seg.end_rank());
        Ok(Coord { i: seg.depth_of_rank(k), j: seg.column.clone() })
    }

    fn rank_of_coord_unchecked(&self, c: &Coord) -> Option<Rank> {
        if c.j.is_zero() && c.i >= self.tail_depth {
            return Some(&self.tail_rank + (&c.i - &self.tail_depth));
        }
        self.segments
            .iter()
            .find(|s| s.column == c.j && s.contains_depth(&c.i))
            .map(|s| s.rank_of_depth(&c.i))
    }

    /// The rank at which the coordinate is visited. Coordinates that only a
    /// future loop can reach raise HorizonExceeded.
    pub fn coord_to_rank(&self, c: &Coord) -> Result<Rank> {
        if c.j.is_zero() {
            self.check_depth(&c.i)?;
        }
        self.rank_of_coord_unchecked(c).ok_or_else(|| {
            Error::HorizonExceeded(format!(
                "coordinate {} is not visited within the committed horizon",
                c
            ))
        })
    }

    /// Rank of (x, 0) through the cumulative detour table: the depth plus
    /// the lengths of every loop strictly below it. O(#stages).
    pub fn pos_column0(&self, x: &BigUint) -> Result<Rank> {
        self.check_depth(x)?;
        let crossed = self.blist.bs.partition_point(|b| b < x);
        let mut rank = x.clone();
        if crossed > 0 {
            rank += &self.cum_detours[crossed - 1];
        }
        Ok(rank)
    }

    /// First `count` coordinates by iterating the successor rule; the
    /// oracle for the segment-table conversions.
    pub fn path_prefix(&self, count: usize) -> Result<Vec<Coord>> {
        path_prefix(count, &self.blist)
    }
}

pub fn path_prefix(count: usize, b: &BList) -> Result<Vec<Coord>> {
    let mut out = Vec::with_capacity(count);
    let mut c = Coord::new(0u32, 0u32);
    for step in 0..count {
        if step > 0 {
            c = next(&out[step - 1], b)?;
        }
        out.push(c.clone());
    }
    Ok(out)
}

enum HopKind {
    ColumnUp,
    ColumnDown,
}

fn walk(b: &BList) -> (Vec<Segment>, BigUint, Rank) {
    let bs = &b.bs;
    let mut segments: Vec<Segment> = Vec::new();
    let mut col = BigUint::zero();
    let mut depth = BigUint::zero();
    let mut rank = BigUint::zero();
    let cap = 16 * bs.len() + 16;

    loop {
        assert!(segments.len() <= cap, "geometry walk did not terminate");
        let descending = col.is_even();
        if descending {
            // Events ahead (>= depth): b_n with j < 2n, or 2b_n with 0 < j <= 2n.
            let mut stop: Option<(BigUint, HopKind)> = None;
            for (idx, bn) in bs.iter().enumerate() {
                let n = idx + 1;
                if *bn >= depth && col < BigUint::from(2 * n) {
                    let cand = bn.clone();
                    if stop.as_ref().is_none_or(|(d, _)| cand < *d) {
                        stop = Some((cand, HopKind::ColumnUp));
                    }
                }
                let twob = bn << 1u32;
                if twob >= depth && !col.is_zero() && col <= BigUint::from(2 * n)
                    && stop.as_ref().is_none_or(|(d, _)| twob < *d) {
                        stop = Some((twob, HopKind::ColumnDown));
                    }
            }
            match stop {
                None => {
                    assert!(col.is_zero(), "open descent away from column 0");
                    return (segments, depth, rank);
                }
                Some((stop_depth, hop)) => {
                    let len = &stop_depth - &depth + 1u32;
                    segments.push(Segment {
                        column: col.clone(),
                        start_depth: depth.clone(),
                        descending: true,
                        len: len.clone(),
                        start_rank: rank.clone(),
                    });
                    rank += len;
                    depth = stop_depth;
                    col = match hop {
                        HopKind::ColumnUp => &col + 1u32,
                        HopKind::ColumnDown => &col - 1u32,
                    };
                }
            }
        } else {
            // Events behind (<= depth): 2b_n+1 with 0 < j <= 2n, b_n+1 with
            // j < 2n, and depth 0.
            let mut stop: (BigUint, HopKind) = (BigUint::zero(), HopKind::ColumnUp);
            for (idx, bn) in bs.iter().enumerate() {
                let n = idx + 1;
                let two_n = BigUint::from(2 * n);
                let e2 = (bn << 1u32) + 1u32;
                if e2 <= depth && col <= two_n && e2 > stop.0 {
                    stop = (e2, HopKind::ColumnUp);
                }
                let e4 = bn + 1u32;
                if e4 <= depth && col < two_n && e4 > stop.0 {
                    stop = (e4, HopKind::ColumnDown);
                }
            }
            let (stop_depth, hop) = stop;
            let len = &depth - &stop_depth + 1u32;
            segments.push(Segment {
                column: col.clone(),
                start_depth: depth.clone(),
                descending: false,
                len: len.clone(),
                start_rank: rank.clone(),
            });
            rank += len;
            depth = stop_depth;
            col = match hop {
                HopKind::ColumnUp => &col + 1u32,
                HopKind::ColumnDown => &col - 1u32,
            };
        }
    }
}

/// Convenience for tests and the CLI: geometry over a closed u64 list.
pub fn closed_geometry(bs: &[u64]) -> Result<StageGeometry> {
    Ok(StageGeometry::new(BList::closed_u64(bs)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coord(i: u64, j: u64) -> Coord {
        Coord::new(i, j)
    }

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn fixture() -> StageGeometry {
        closed_geometry(&[6, 30]).unwrap()
    }

    #[test]
    fn blist_validation() {
        assert!(BList::closed_u64(&[6, 30]).is_ok());
        assert!(BList::closed_u64(&[0]).is_err());
        assert!(BList::closed_u64(&[6, 13]).is_err());
        assert!(BList::closed_u64(&[6, 12]).is_err());
        assert!(BList::closed_u64(&[6, 14]).is_ok());
        assert!(BList::new(vec![big(6)], Extension::Open(big(13))).is_err());
        assert!(BList::new(vec![big(6)], Extension::Open(big(14))).is_ok());
    }

    #[test]
    fn next_fixture_cases() {
        let b = BList::closed_u64(&[6, 30]).unwrap();
        assert_eq!(next(&coord(0, 0), &b).unwrap(), coord(1, 0));
        assert_eq!(next(&coord(6, 0), &b).unwrap(), coord(6, 1));
        assert_eq!(next(&coord(12, 2), &b).unwrap(), coord(12, 1));
        // Ascent in an odd column and the top turn.
        assert_eq!(next(&coord(5, 1), &b).unwrap(), coord(4, 1));
        assert_eq!(next(&coord(0, 1), &b).unwrap(), coord(0, 2));
        // Rejoining column 0 after the first loop.
        assert_eq!(next(&coord(7, 1), &b).unwrap(), coord(7, 0));
        assert_eq!(next(&coord(7, 0), &b).unwrap(), coord(8, 0));
        // Case 2: right turn at 2b_1 + 1 during the second loop.
        assert_eq!(next(&coord(13, 1), &b).unwrap(), coord(13, 2));
    }

    #[test]
    fn next_open_horizon() {
        let b = BList::new(vec![big(6)], Extension::Open(big(14))).unwrap();
        assert_eq!(next(&coord(13, 0), &b).unwrap(), coord(14, 0));
        assert!(matches!(
            next(&coord(14, 0), &b),
            Err(Error::HorizonExceeded(_))
        ));
    }

    #[test]
    fn path_prefix_fixtures() {
        let b = BList::closed_u64(&[6, 30]).unwrap();
        let p = path_prefix(15, &b).unwrap();
        assert_eq!(&p[..3], &[coord(0, 0), coord(1, 0), coord(2, 0)]);
        assert_eq!(p[6], coord(6, 0));
        assert_eq!(p[7], coord(6, 1));
        assert_eq!(p[13], coord(0, 1));
        assert_eq!(p[14], coord(0, 2));
    }

    #[test]
    fn rank_fixtures() {
        let g = fixture();
        assert_eq!(g.rank_to_coord(&big(0)).unwrap(), coord(0, 0));
        assert_eq!(g.rank_to_coord(&big(33)).unwrap(), coord(7, 0));
        assert_eq!(g.rank_to_coord(&big(14)).unwrap(), coord(0, 2));
        assert_eq!(g.coord_to_rank(&coord(1, 0)).unwrap(), big(1));
        assert_eq!(g.coord_to_rank(&coord(30, 0)).unwrap(), big(56));
        assert_eq!(g.coord_to_rank(&coord(0, 1)).unwrap(), big(13));
        assert_eq!(g.pos_column0(&big(6)).unwrap(), big(6));
        assert_eq!(g.pos_column0(&big(7)).unwrap(), big(33));
        assert_eq!(g.pos_column0(&big(30)).unwrap(), big(56));
        assert_eq!(g.detour(1), big(26));
    }

    #[test]
    fn oracle_agreement_small() {
        let g = closed_geometry(&[6, 30, 100]).unwrap();
        let path = g.path_prefix(10_000).unwrap();
        for (k, c) in path.iter().enumerate() {
            let k = big(k as u64);
            assert_eq!(&g.rank_to_coord(&k).unwrap(), c, "rank {k}");
            assert_eq!(g.coord_to_rank(c).unwrap(), k, "coord {c}");
            if c.j.is_zero() {
                assert_eq!(g.pos_column0(&c.i).unwrap(), k);
            }
        }
    }

    #[test]
    fn unvisited_coordinate_is_horizon_error() {
        let g = fixture();
        // Column 5 is only reached by the loop of a later stage.
        assert!(matches!(
            g.coord_to_rank(&coord(3, 5)),
            Err(Error::HorizonExceeded(_))
        ));
    }

    #[test]
    fn open_geometry_horizon() {
        let b = BList::new(vec![big(6)], Extension::Open(big(100))).unwrap();
        let g = StageGeometry::new(b);
        assert_eq!(g.pos_column0(&big(100)).unwrap(), big(126));
        assert!(g.pos_column0(&big(101)).is_err());
        assert_eq!(g.rank_horizon(), Some(big(126)));
        assert_eq!(g.rank_to_coord(&big(126)).unwrap(), coord(100, 0));
        assert!(g.rank_to_coord(&big(127)).is_err());
    }

    #[test]
    fn empty_blist_is_straight_descent() {
        let g = StageGeometry::new(BList::closed(vec![]).unwrap());
        assert_eq!(g.rank_to_coord(&big(41)).unwrap(), coord(41, 0));
        assert_eq!(g.pos_column0(&big(7)).unwrap(), big(7));
    }

    mod random_lists {
        use super::*;
        use proptest::prelude::*;

        /// Valid parameter lists by construction: each next value sits
        /// strictly above 2b + 1.
        fn arb_blist() -> impl Strategy<Value = Vec<u64>> {
            (1u64..18, proptest::collection::vec(0u64..24, 0..3)).prop_map(|(b1, gaps)| {
                let mut out = vec![b1];
                for g in gaps {
                    let last = *out.last().unwrap();
                    out.push(2 * last + 2 + g);
                }
                out
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn segment_table_matches_iteration(bs in arb_blist(), steps in 200usize..800) {
                let g = closed_geometry(&bs).unwrap();
                let path = g.path_prefix(steps).unwrap();
                let mut seen = std::collections::HashSet::new();
                for (k, c) in path.iter().enumerate() {
                    prop_assert!(seen.insert(c.clone()));
                    let k = big(k as u64);
                    prop_assert_eq!(&g.rank_to_coord(&k).unwrap(), c);
                    prop_assert_eq!(g.coord_to_rank(c).unwrap(), k.clone());
                    if c.j.is_zero() {
                        prop_assert_eq!(g.pos_column0(&c.i).unwrap(), k);
                    }
                }
            }
        }
    }
}
