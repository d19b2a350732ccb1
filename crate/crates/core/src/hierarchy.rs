//! Dyadic hierarchical structure on site indices.
//!
//! Sites are labeled `1..=2^n`. Level-`r` blocks are the members of the
//! partition `{1..2^r} ∪ {2^r+1..2·2^r} ∪ …`; the hierarchical distance
//! between two sites is the smallest level whose block contains both.
//! Internally everything is 0-based; the 1-based convention only exists at
//! this module's API boundary.

/// 1-based site label in `{1, …, 2^n}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site(pub u64);

impl Site {
    /// Convert a 0-based array index to a site label.
    pub fn from_index(i: usize) -> Self {
        Site(i as u64 + 1)
    }

    /// The 0-based array index of this site.
    pub fn index(self) -> usize {
        debug_assert!(self.0 >= 1, "sites are 1-based");
        (self.0 - 1) as usize
    }
}

/// Hierarchical distance: the smallest level `r` such that `x` and `y` share
/// a level-`r` block, i.e. `⌈x/2^r⌉ = ⌈y/2^r⌉`.
///
/// Computed as the bit length of `(x-1) XOR (y-1)`: the blocks of level `r`
/// are exactly the sets of labels whose 0-based forms agree above bit `r`.
/// Satisfies the strong triangle inequality `d(x,z) ≤ max(d(x,y), d(y,z))`.
pub fn ultrametric_distance(x: Site, y: Site) -> u32 {
    debug_assert!(x.0 >= 1 && y.0 >= 1, "sites are 1-based");
    let diff = (x.0 - 1) ^ (y.0 - 1);
    u64::BITS - diff.leading_zeros()
}

/// The level-`r` block containing `x`, as an inclusive range of site labels.
///
/// The block has exactly `2^r` sites and `y` lies in it iff
/// `ultrametric_distance(x, y) ≤ r`.
pub fn block_range(r: u32, x: Site) -> (Site, Site) {
    debug_assert!(x.0 >= 1, "sites are 1-based");
    let width = 1u64 << r;
    let lo = ((x.0 - 1) >> r << r) + 1;
    (Site(lo), Site(lo + width - 1))
}

/// Entry variance of the level-`r` hierarchical layer at `(x, y)`:
/// `2^{-r}·2` on the diagonal, `2^{-r}` when `1 ≤ d(x,y) ≤ r`, and `0`
/// otherwise. The layer is therefore block diagonal with GOE blocks of size
/// `2^r`.
pub fn layer_variance(x: Site, y: Site, r: u32) -> f64 {
    let d = ultrametric_distance(x, y);
    let scale = (-(r as f64)).exp2();
    if d == 0 {
        2.0 * scale
    } else if d <= r {
        scale
    } else {
        0.0
    }
}
