//! Uniform-depth quadtree over a square root box.
//!
//! Cells are addressed by [`MortonKey`]s: the `ix` bits of a cell occupy the
//! even bit positions of its index and the `iy` bits the odd ones, so sorting
//! by index walks the Z-order space-filling curve. Every level is complete;
//! empty cells simply own an empty particle range.

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansions::Charge;

/// Deepest supported tree level. Keeps cell coordinates in 16 bits.
pub const MAX_DEPTH: u8 = 16;

/// Default leaf occupancy used to pick the depth automatically.
pub const DEFAULT_S_TARGET: f64 = 30.0;

const REL_MARGIN: f64 = 1e-9;
const ABS_MARGIN: f64 = 1e-12;

/// Spreads the low 32 bits of `v` so that bit k lands on bit 2k.
fn spread_bits(v: u64) -> u64 {
    let mut x = v & 0xffff_ffff;
    x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
    x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

fn compact_bits(v: u64) -> u64 {
    let mut x = v & 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x >> 4)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x >> 8)) & 0x0000_ffff_0000_ffff;
    x = (x | (x >> 16)) & 0x0000_0000_ffff_ffff;
    x
}

/// A cell address: tree level plus Morton index within that level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MortonKey {
    pub level: u8,
    pub index: u64,
}

/// Interleaves `(ix, iy)` into a key at `level`.
pub fn morton_encode(level: u8, ix: u32, iy: u32) -> Result<MortonKey> {
    if level > MAX_DEPTH {
        return Err(Error::domain(format!("level {level} exceeds {MAX_DEPTH}")));
    }
    let side = 1u64 << level;
    if u64::from(ix) >= side || u64::from(iy) >= side {
        return Err(Error::domain(format!(
            "cell coordinates ({ix}, {iy}) outside a level-{level} grid of side {side}"
        )));
    }
    Ok(MortonKey {
        level,
        index: spread_bits(u64::from(ix)) | (spread_bits(u64::from(iy)) << 1),
    })
}

/// Inverse of [`morton_encode`].
pub fn morton_decode(key: MortonKey) -> (u32, u32) {
    (
        compact_bits(key.index) as u32,
        compact_bits(key.index >> 1) as u32,
    )
}

impl MortonKey {
    pub const ROOT: MortonKey = MortonKey { level: 0, index: 0 };

    /// Checked constructor; `index` must be below `4^level`.
    pub fn new(level: u8, index: u64) -> Result<Self> {
        if level > MAX_DEPTH || index >= 1u64 << (2 * u32::from(level)) {
            return Err(Error::domain(format!(
                "invalid Morton key (level {level}, index {index})"
            )));
        }
        Ok(MortonKey { level, index })
    }

    pub fn coords(self) -> (u32, u32) {
        morton_decode(self)
    }

    pub fn parent(self) -> Result<MortonKey> {
        if self.level == 0 {
            return Err(Error::domain("the root cell has no parent"));
        }
        Ok(MortonKey {
            level: self.level - 1,
            index: self.index >> 2,
        })
    }

    /// The four children in Morton order.
    pub fn children(self) -> [MortonKey; 4] {
        let level = self.level + 1;
        let base = self.index << 2;
        [0, 1, 2, 3].map(|c| MortonKey {
            level,
            index: base + c,
        })
    }

    /// Ancestor at `level` (which must not exceed `self.level`).
    pub fn ancestor(self, level: u8) -> MortonKey {
        debug_assert!(level <= self.level);
        MortonKey {
            level,
            index: self.index >> (2 * u32::from(self.level - level)),
        }
    }

    /// Same-level cells sharing an edge or a vertex.
    pub fn is_adjacent(self, other: MortonKey) -> bool {
        if self.level != other.level || self == other {
            return false;
        }
        let (ax, ay) = self.coords();
        let (bx, by) = other.coords();
        ax.abs_diff(bx) <= 1 && ay.abs_diff(by) <= 1
    }

    /// Same-level Moore neighbourhood clipped at the domain boundary, in
    /// Morton order.
    pub fn neighbors(self) -> Vec<MortonKey> {
        let side = 1i64 << self.level;
        let (x, y) = self.coords();
        let (x, y) = (i64::from(x), i64::from(y));
        let mut out = Vec::with_capacity(8);
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if (0..side).contains(&nx) && (0..side).contains(&ny) {
                    out.push(
                        morton_encode(self.level, nx as u32, ny as u32)
                            .expect("neighbour inside grid"),
                    );
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Children of the parent's neighbours that are not adjacent to this
    /// cell, in Morton order. Empty at levels 0 and 1.
    pub fn interaction_list(self) -> Vec<MortonKey> {
        let Ok(parent) = self.parent() else {
            return Vec::new();
        };
        let mut out: Vec<MortonKey> = parent
            .neighbors()
            .into_iter()
            .flat_map(MortonKey::children)
            .filter(|&c| !self.is_adjacent(c))
            .collect();
        out.sort_unstable();
        out
    }
}

/// Bounding square of the whole particle set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootBox {
    pub center: [f64; 2],
    pub half_width: f64,
}

impl RootBox {
    /// Tight bounding square, grown by a relative margin so that particles on
    /// the boundary are strictly interior.
    pub fn enclosing(points: impl IntoIterator<Item = Complex64>) -> Result<Self> {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut any = false;
        for z in points {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::domain(format!("non-finite particle position {z}")));
            }
            any = true;
            lo[0] = lo[0].min(z.re);
            lo[1] = lo[1].min(z.im);
            hi[0] = hi[0].max(z.re);
            hi[1] = hi[1].max(z.im);
        }
        if !any {
            return Err(Error::domain("cannot build a tree over zero particles"));
        }
        let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let half = 0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let half_width = half + (half * REL_MARGIN).max(ABS_MARGIN);
        Ok(RootBox { center, half_width })
    }

    pub fn lower_left(&self) -> [f64; 2] {
        [
            self.center[0] - self.half_width,
            self.center[1] - self.half_width,
        ]
    }
}

/// How deep to subdivide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Depth {
    #[default]
    Auto,
    Fixed(u8),
}

impl Depth {
    /// `max(2, round(log4(n / s_target)))`, capped at [`MAX_DEPTH`].
    pub fn auto_for(n: usize, s_target: f64) -> u8 {
        let raw = ((n as f64) / s_target).log(4.0).round();
        if raw.is_nan() || raw < 2.0 {
            2
        } else {
            raw.min(f64::from(MAX_DEPTH)) as u8
        }
    }
}

impl Serialize for Depth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Depth::Auto => s.serialize_str("auto"),
            Depth::Fixed(d) => s.serialize_u8(*d),
        }
    }
}

impl<'de> Deserialize<'de> for Depth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u8),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Depth::Fixed(v)),
            Raw::Str(s) if s == "auto" => Ok(Depth::Auto),
            Raw::Str(s) => s.parse().map(Depth::Fixed).map_err(|_| {
                serde::de::Error::custom(format!("depth must be an integer or \"auto\", got {s:?}"))
            }),
        }
    }
}

impl std::str::FromStr for Depth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Depth::Auto);
        }
        s.parse()
            .map(Depth::Fixed)
            .map_err(|_| Error::domain(format!("depth must be an integer or \"auto\", got {s:?}")))
    }
}

/// One tree node. `range` indexes the tree's sorted particle array; since the
/// array is in leaf Morton order, every cell's particles are contiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub key: MortonKey,
    pub range: Range<usize>,
}

impl Cell {
    pub fn count(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

/// Complete quadtree with particles sorted by leaf Morton index.
#[derive(Debug, Clone)]
pub struct Quadtree {
    root_box: RootBox,
    depth: u8,
    levels: Vec<Vec<Cell>>,
    particles: Vec<Charge>,
    order: Vec<usize>,
}

impl Quadtree {
    /// Builds a tree with `depth` levels below the root.
    ///
    /// Explicit depths must lie in `1..=16`; [`Depth::Auto`] picks the depth
    /// from `s_target`, the desired particles per leaf.
    pub fn build(particles: &[Charge], depth: Depth, s_target: f64) -> Result<Self> {
        for c in particles {
            if !c.q.re.is_finite() || !c.q.im.is_finite() {
                return Err(Error::domain(format!("non-finite strength {}", c.q)));
            }
        }
        let root_box = RootBox::enclosing(particles.iter().map(|c| c.z))?;
        let depth = match depth {
            Depth::Fixed(d) if (1..=MAX_DEPTH).contains(&d) => d,
            Depth::Fixed(d) => {
                return Err(Error::domain(format!(
                    "tree depth {d} outside [1, {MAX_DEPTH}]"
                )))
            }
            Depth::Auto => {
                if !(s_target > 0.0) {
                    return Err(Error::domain("s_target must be positive"));
                }
                Depth::auto_for(particles.len(), s_target)
            }
        };

        let side = 1u32 << depth;
        let width = 2.0 * root_box.half_width / f64::from(side);
        let [x0, y0] = root_box.lower_left();
        let cell_of = |v: f64, origin: f64| -> u32 {
            let i = ((v - origin) / width).floor();
            if i <= 0.0 {
                0
            } else {
                (i as u32).min(side - 1)
            }
        };

        let mut keyed: Vec<(u64, usize)> = particles
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let key = morton_encode(depth, cell_of(c.z.re, x0), cell_of(c.z.im, y0))
                    .expect("clamped into grid");
                (key.index, i)
            })
            .collect();
        // stable: equal keys keep input order
        keyed.sort_by_key(|&(k, _)| k);

        let order: Vec<usize> = keyed.iter().map(|&(_, i)| i).collect();
        let sorted: Vec<Charge> = order.iter().map(|&i| particles[i]).collect();

        let mut levels = Vec::with_capacity(usize::from(depth) + 1);
        for level in 0..=depth {
            let shift = 2 * u32::from(depth - level);
            let n_cells = 1usize << (2 * u32::from(level));
            let mut cells = Vec::with_capacity(n_cells);
            let mut cursor = 0usize;
            for index in 0..n_cells as u64 {
                let start = cursor;
                while cursor < keyed.len() && keyed[cursor].0 >> shift == index {
                    cursor += 1;
                }
                cells.push(Cell {
                    key: MortonKey { level, index },
                    range: start..cursor,
                });
            }
            debug_assert_eq!(cursor, keyed.len());
            levels.push(cells);
        }

        Ok(Quadtree {
            root_box,
            depth,
            levels,
            particles: sorted,
            order,
        })
    }

    pub fn root_box(&self) -> RootBox {
        self.root_box
    }

    /// Leaf level.
    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Particles in leaf Morton order.
    pub fn particles(&self) -> &[Charge] {
        &self.particles
    }

    /// `order()[i]` is the input index of sorted particle `i`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn level(&self, level: u8) -> &[Cell] {
        &self.levels[usize::from(level)]
    }

    pub fn leaves(&self) -> &[Cell] {
        self.level(self.depth)
    }

    pub fn cell(&self, key: MortonKey) -> &Cell {
        &self.levels[usize::from(key.level)][key.index as usize]
    }

    pub fn count(&self, key: MortonKey) -> usize {
        self.cell(key).count()
    }

    pub fn cell_particles(&self, key: MortonKey) -> &[Charge] {
        &self.particles[self.cell(key).range.clone()]
    }

    pub fn is_leaf(&self, key: MortonKey) -> bool {
        key.level == self.depth
    }

    /// Width of a cell at `level`.
    pub fn cell_width(&self, level: u8) -> f64 {
        2.0 * self.root_box.half_width / (1u64 << level) as f64
    }

    pub fn cell_center(&self, key: MortonKey) -> Complex64 {
        let (ix, iy) = key.coords();
        let w = self.cell_width(key.level);
        let [x0, y0] = self.root_box.lower_left();
        Complex64::new(
            x0 + (f64::from(ix) + 0.5) * w,
            y0 + (f64::from(iy) + 0.5) * w,
        )
    }

    /// Number of non-empty cells over all levels.
    pub fn non_empty_cells(&self) -> usize {
        self.levels
            .iter()
            .flat_map(|l| l.iter())
            .filter(|c| !c.is_empty())
            .count()
    }

    /// Keys of all cells, level by level, each level in Morton order.
    pub fn keys(&self) -> impl Iterator<Item = MortonKey> + '_ {
        self.levels.iter().flat_map(|l| l.iter().map(|c| c.key))
    }
}
