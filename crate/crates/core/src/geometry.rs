//! Finite field arithmetic and the affine geometry of F_q^d.
//!
//! Field elements are encoded as integers `0..q-1`; for `q = p^n` the base-p
//! digits of the code are the coefficients of the representing polynomial,
//! little-endian (constant term first). Points of `F_q^d` get the analogous
//! base-q integer index, which is what transcripts and colouring encodings
//! are keyed on.

use std::collections::HashMap;

use once_cell::sync::OnceCell;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus is reducible over F_{0}")]
    ReducibleModulus(u64),
    #[error("no default irreducible modulus for q = {0}; supply one explicitly")]
    NoDefaultModulus(u64),
    #[error("modulus must have degree {expected}, got {got}")]
    BadModulusDegree { expected: u32, got: usize },
    #[error("cannot build a line from coincident points")]
    CoincidentPoints,
}

/// `sigma(d, n) = n^(d-1) + ... + n + 1 = (n^d - 1)/(n - 1)`.
///
/// Counts the directions of `F_n^d`, and equally the lines through any
/// fixed point.
pub fn sigma(d: u32, n: u64) -> u64 {
    let mut acc: u128 = 0;
    let mut pow: u128 = 1;
    for _ in 0..d {
        acc += pow;
        pow *= n as u128;
    }
    u64::try_from(acc).expect("sigma overflow")
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut f = 2;
    while f * f <= p {
        if p % f == 0 {
            return false;
        }
        f += 1;
    }
    true
}

/// Default irreducible moduli (little-endian coefficients, degree n) for the
/// small extension fields the toolkit ships ready-made.
fn default_modulus(p: u64, n: u32) -> Option<Vec<u32>> {
    let m: &[u32] = match (p, n) {
        (2, 2) => &[1, 1, 1],       // x^2 + x + 1
        (2, 3) => &[1, 1, 0, 1],    // x^3 + x + 1
        (3, 2) => &[1, 0, 1],       // x^2 + 1
        (2, 4) => &[1, 1, 0, 0, 1], // x^4 + x + 1
        (5, 2) => &[3, 0, 1],       // x^2 + 3
        (7, 2) => &[1, 0, 1],       // x^2 + 1 (-1 is a non-square mod 7)
        (3, 3) => &[1, 2, 0, 1],    // x^3 + 2x + 1
        _ => return None,
    };
    Some(m.to_vec())
}

/// The field GF(q), q = p^n, with all arithmetic table-driven.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    p: u64,
    n: u32,
    q: u64,
    /// Little-endian coefficients of the degree-n irreducible modulus over
    /// F_p; empty when n = 1.
    modulus: Vec<u32>,
    mul: Vec<u32>,
    inv: Vec<u32>,
}

// Polynomial helpers over F_p, coefficients little-endian, used only during
// field construction.
mod poly {
    pub fn deg(f: &[u64]) -> Option<usize> {
        f.iter().rposition(|&c| c != 0)
    }

    /// Remainder of f mod g over F_p; g must be nonzero.
    pub fn rem(f: &[u64], g: &[u64], p: u64) -> Vec<u64> {
        let dg = deg(g).expect("division by zero polynomial");
        let lead_inv = mod_inv(g[dg], p);
        let mut r: Vec<u64> = f.to_vec();
        while let Some(dr) = deg(&r) {
            if dr < dg {
                break;
            }
            let coef = (r[dr] * lead_inv) % p;
            let shift = dr - dg;
            for i in 0..=dg {
                let sub = (coef * g[i]) % p;
                r[i + shift] = (r[i + shift] + p - sub) % p;
            }
        }
        r
    }

    pub fn mod_inv(a: u64, p: u64) -> u64 {
        // p is prime, a != 0
        mod_pow(a % p, p - 2, p)
    }

    fn mod_pow(mut b: u64, mut e: u64, m: u64) -> u64 {
        let mut acc = 1u64;
        b %= m;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * b % m;
            }
            b = b * b % m;
            e >>= 1;
        }
        acc
    }

    /// Exhaustive irreducibility test: no monic divisor of degree
    /// 1..=n/2. Fine for the small moduli we ever construct.
    pub fn is_irreducible(f: &[u64], p: u64) -> bool {
        let n = match deg(f) {
            Some(n) if n >= 1 => n,
            _ => return false,
        };
        if n == 1 {
            return true;
        }
        for d in 1..=n / 2 {
            // all monic polynomials of degree d
            let count = p.pow(d as u32);
            for code in 0..count {
                let mut g = vec![0u64; d + 1];
                let mut c = code;
                for coeff in g.iter_mut().take(d) {
                    *coeff = c % p;
                    c /= p;
                }
                g[d] = 1;
                if deg(&rem(f, &g, p)).is_none() {
                    return false;
                }
            }
        }
        true
    }
}

impl Field {
    /// Build GF(p^n). When `modulus` is omitted and n > 1, a built-in
    /// default is used for the handful of shipped field orders.
    pub fn new(p: u64, n: u32, modulus: Option<Vec<u32>>) -> Result<Field, GeometryError> {
        if !is_prime(p) {
            return Err(GeometryError::NotPrime(p));
        }
        assert!(n >= 1, "extension degree must be >= 1");
        let q = p.checked_pow(n).expect("field order overflow");
        assert!(q <= 1 << 16, "field orders above 2^16 are unsupported");

        let modulus: Vec<u32> = if n == 1 {
            match modulus {
                None => Vec::new(),
                Some(m) if m.is_empty() => Vec::new(),
                Some(_) => {
                    return Err(GeometryError::BadModulusDegree { expected: 1, got: 0 });
                }
            }
        } else {
            let raw = match modulus {
                Some(m) => m,
                None => default_modulus(p, n).ok_or(GeometryError::NoDefaultModulus(q))?,
            };
            let reduced: Vec<u64> = raw.iter().map(|&c| c as u64 % p).collect();
            match poly::deg(&reduced) {
                Some(d) if d == n as usize => {}
                d => {
                    return Err(GeometryError::BadModulusDegree {
                        expected: n,
                        got: d.map_or(0, |d| d),
                    });
                }
            }
            if !poly::is_irreducible(&reduced, p) {
                return Err(GeometryError::ReducibleModulus(p));
            }
            reduced.iter().map(|&c| c as u32).collect()
        };

        let mut field = Field {
            p,
            n,
            q,
            modulus,
            mul: Vec::new(),
            inv: Vec::new(),
        };
        field.build_tables();
        Ok(field)
    }

    fn build_tables(&mut self) {
        let q = self.q as usize;
        let mut mul = vec![0u32; q * q];
        for a in 0..self.q {
            for b in a..self.q {
                let prod = self.mul_raw(a, b);
                mul[(a * self.q + b) as usize] = prod as u32;
                mul[(b * self.q + a) as usize] = prod as u32;
            }
        }
        let mut inv = vec![0u32; q];
        for a in 1..q {
            for b in 1..q {
                if mul[a * q + b] == 1 {
                    inv[a] = b as u32;
                    break;
                }
            }
            debug_assert!(inv[a] != 0, "no inverse found: not a field");
        }
        self.mul = mul;
        self.inv = inv;
    }

    fn digits(&self, a: u64) -> Vec<u64> {
        let mut out = vec![0u64; self.n as usize];
        let mut a = a;
        for d in out.iter_mut() {
            *d = a % self.p;
            a /= self.p;
        }
        out
    }

    fn from_digits(&self, digits: &[u64]) -> u64 {
        let mut acc = 0u64;
        for &d in digits.iter().rev() {
            acc = acc * self.p + d;
        }
        acc
    }

    /// Multiplication by polynomial arithmetic; only used to seed the table.
    fn mul_raw(&self, a: u64, b: u64) -> u64 {
        if self.n == 1 {
            return a * b % self.p;
        }
        let da = self.digits(a);
        let db = self.digits(b);
        let mut prod = vec![0u64; 2 * self.n as usize];
        for (i, &x) in da.iter().enumerate() {
            for (j, &y) in db.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % self.p;
            }
        }
        let modulus: Vec<u64> = self.modulus.iter().map(|&c| c as u64).collect();
        let mut r = poly::rem(&prod, &modulus, self.p);
        r.resize(self.n as usize, 0);
        self.from_digits(&r)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn order(&self) -> u64 {
        self.q
    }

    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        if self.n == 1 {
            return (a + b) % self.p;
        }
        let da = self.digits(a);
        let db = self.digits(b);
        let sum: Vec<u64> = da.iter().zip(&db).map(|(x, y)| (x + y) % self.p).collect();
        self.from_digits(&sum)
    }

    pub fn neg(&self, a: u64) -> u64 {
        if self.n == 1 {
            return (self.p - a) % self.p;
        }
        let da = self.digits(a);
        let neg: Vec<u64> = da.iter().map(|&x| (self.p - x) % self.p).collect();
        self.from_digits(&neg)
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.mul[(a * self.q + b) as usize] as u64
    }

    pub fn inv(&self, a: u64) -> u64 {
        assert!(a != 0, "zero has no inverse");
        self.inv[a as usize] as u64
    }

    pub fn elements(&self) -> impl Iterator<Item = u64> {
        0..self.q
    }
}

/// A point of F_q^d: coordinate vector plus its base-q integer index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Point {
    pub coords: Vec<u64>,
    pub index: u64,
}

/// A canonical affine line of F_q^d.
///
/// `direction` is pivot-normalized (first nonzero coordinate is 1) and
/// `base` is the point of the line with the smallest index, so two `Line`
/// values are equal iff their point sets are equal.
#[derive(Debug, Clone)]
pub struct Line {
    pub base: Point,
    pub direction: Point,
    /// Sorted indices of all q points on the line.
    pub points: Vec<u64>,
}

impl PartialEq for Line {
    fn eq(&self, other: &Self) -> bool {
        self.base.index == other.base.index && self.direction.index == other.direction.index
    }
}

impl Eq for Line {}

impl std::hash::Hash for Line {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.base.index.hash(state);
        self.direction.index.hash(state);
    }
}

impl Line {
    pub fn contains(&self, point_index: u64) -> bool {
        self.points.binary_search(&point_index).is_ok()
    }

    /// Canonical sort/index key: (direction, base).
    pub fn key(&self) -> (u64, u64) {
        (self.direction.index, self.base.index)
    }
}

struct LineCache {
    lines: Vec<Line>,
    index: HashMap<(u64, u64), u64>,
}

/// Hard cap on the number of lines `all_lines` will materialize.
pub const LINE_ENUM_LIMIT: u64 = 1_000_000;

/// The affine space F_q^d together with lazily built enumeration caches.
///
/// Immutable after construction; safe to share across threads.
pub struct Space {
    field: Field,
    d: u32,
    directions: OnceCell<Vec<Point>>,
    dir_ranks: OnceCell<HashMap<u64, u64>>,
    line_cache: OnceCell<LineCache>,
}

impl Space {
    pub fn new(field: Field, d: u32) -> Space {
        assert!(d >= 2, "dimension must be >= 2");
        let _ = (field.order() as u128).pow(d); // overflow check
        Space {
            field,
            d,
            directions: OnceCell::new(),
            dir_ranks: OnceCell::new(),
            line_cache: OnceCell::new(),
        }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn q(&self) -> u64 {
        self.field.order()
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    pub fn num_points(&self) -> u64 {
        self.q().pow(self.d)
    }

    pub fn num_directions(&self) -> u64 {
        sigma(self.d, self.q())
    }

    pub fn num_lines(&self) -> u64 {
        self.num_directions() * self.q().pow(self.d - 1)
    }

    pub fn point(&self, index: u64) -> Point {
        assert!(index < self.num_points(), "point index out of range");
        let q = self.q();
        let mut coords = vec![0u64; self.d as usize];
        let mut rest = index;
        for c in coords.iter_mut() {
            *c = rest % q;
            rest /= q;
        }
        Point { coords, index }
    }

    pub fn point_from_coords(&self, coords: &[u64]) -> Point {
        assert_eq!(coords.len(), self.d as usize);
        let q = self.q();
        let mut index = 0u64;
        for &c in coords.iter().rev() {
            assert!(c < q, "coordinate out of range");
            index = index * q + c;
        }
        Point {
            coords: coords.to_vec(),
            index,
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.num_points()).map(|i| self.point(i))
    }

    pub fn add(&self, a: &Point, b: &Point) -> Point {
        let coords: Vec<u64> = a
            .coords
            .iter()
            .zip(&b.coords)
            .map(|(&x, &y)| self.field.add(x, y))
            .collect();
        self.point_from_coords(&coords)
    }

    pub fn sub(&self, a: &Point, b: &Point) -> Point {
        let coords: Vec<u64> = a
            .coords
            .iter()
            .zip(&b.coords)
            .map(|(&x, &y)| self.field.sub(x, y))
            .collect();
        self.point_from_coords(&coords)
    }

    pub fn scale(&self, lambda: u64, a: &Point) -> Point {
        let coords: Vec<u64> = a.coords.iter().map(|&x| self.field.mul(lambda, x)).collect();
        self.point_from_coords(&coords)
    }

    /// Unique projective representative: scale so the first nonzero
    /// coordinate becomes 1. `v` must be nonzero.
    pub fn normalize_direction(&self, v: &Point) -> Point {
        let pivot = v
            .coords
            .iter()
            .copied()
            .find(|&c| c != 0)
            .expect("zero vector has no direction");
        if pivot == 1 {
            return v.clone();
        }
        self.scale(self.field.inv(pivot), v)
    }

    /// All normalized directions, sorted by point index.
    pub fn directions(&self) -> &[Point] {
        self.directions.get_or_init(|| {
            let mut dirs = Vec::with_capacity(self.num_directions() as usize);
            for p in self.points() {
                if p.coords.iter().copied().find(|&c| c != 0) == Some(1) {
                    dirs.push(p);
                }
            }
            debug_assert_eq!(dirs.len() as u64, self.num_directions());
            dirs
        })
    }

    /// Rank of a normalized direction in `directions()` order.
    pub fn dir_rank(&self, dir: &Point) -> u64 {
        let ranks = self.dir_ranks.get_or_init(|| {
            self.directions()
                .iter()
                .enumerate()
                .map(|(i, p)| (p.index, i as u64))
                .collect()
        });
        *ranks.get(&dir.index).expect("not a normalized direction")
    }

    /// The canonical line through `base` with direction `dir` (any nonzero
    /// vector).
    pub fn line(&self, base: &Point, dir: &Point) -> Line {
        let direction = self.normalize_direction(dir);
        let mut points = Vec::with_capacity(self.q() as usize);
        for lambda in 0..self.q() {
            points.push(self.add(base, &self.scale(lambda, &direction)).index);
        }
        points.sort_unstable();
        let min = points[0];
        Line {
            base: self.point(min),
            direction,
            points,
        }
    }

    /// The unique line containing two distinct points.
    pub fn line_from_points(&self, x1: &Point, x2: &Point) -> Result<Line, GeometryError> {
        if x1.index == x2.index {
            return Err(GeometryError::CoincidentPoints);
        }
        let dir = self.sub(x2, x1);
        Ok(self.line(x1, &dir))
    }

    /// The sigma_d(q) lines through a point, in direction order.
    pub fn lines_through(&self, x: &Point) -> Vec<Line> {
        self.directions()
            .iter()
            .map(|dir| self.line(x, dir))
            .collect()
    }

    fn build_line_cache(&self) -> &LineCache {
        self.line_cache.get_or_init(|| {
            assert!(
                self.num_lines() <= LINE_ENUM_LIMIT,
                "space has {} lines; full enumeration is desk-scale only",
                self.num_lines()
            );
            let np = self.num_points() as usize;
            let mut lines = Vec::with_capacity(self.num_lines() as usize);
            let mut index = HashMap::with_capacity(self.num_lines() as usize);
            for dir in self.directions() {
                let mut seen = vec![false; np];
                for base_idx in 0..self.num_points() {
                    if seen[base_idx as usize] {
                        continue;
                    }
                    let line = self.line(&self.point(base_idx), dir);
                    for &p in &line.points {
                        seen[p as usize] = true;
                    }
                    index.insert(line.key(), lines.len() as u64);
                    lines.push(line);
                }
            }
            LineCache { lines, index }
        })
    }

    /// Every line of the space exactly once, sorted by
    /// (direction rank, base index). Desk scale only.
    pub fn all_lines(&self) -> &[Line] {
        &self.build_line_cache().lines
    }

    /// Global index of a line in `all_lines` order. Works without full
    /// enumeration (one pass over the direction's cosets).
    pub fn line_index(&self, line: &Line) -> u64 {
        if let Some(cache) = self.line_cache.get() {
            return cache.index[&line.key()];
        }
        let per_dir = self.q().pow(self.d - 1);
        let dir = self.dir_rank(&line.direction);
        dir * per_dir + self.base_rank(&line.direction, line.base.index)
    }

    /// Rank of `base` among the canonical base points of direction `dir`.
    fn base_rank(&self, dir: &Point, base: u64) -> u64 {
        let np = self.num_points() as usize;
        let mut seen = vec![false; np];
        let mut rank = 0u64;
        for idx in 0..self.num_points() {
            if seen[idx as usize] {
                continue;
            }
            if idx == base {
                return rank;
            }
            let line = self.line(&self.point(idx), dir);
            for &p in &line.points {
                seen[p as usize] = true;
            }
            rank += 1;
        }
        panic!("base point is not a canonical base for this direction");
    }

    /// Inverse of `line_index`.
    pub fn line_at(&self, index: u64) -> Line {
        assert!(index < self.num_lines(), "line index out of range");
        if let Some(cache) = self.line_cache.get() {
            return cache.lines[index as usize].clone();
        }
        let per_dir = self.q().pow(self.d - 1);
        let dir = &self.directions()[(index / per_dir) as usize].clone();
        let want = index % per_dir;
        let np = self.num_points() as usize;
        let mut seen = vec![false; np];
        let mut rank = 0u64;
        for idx in 0..self.num_points() {
            if seen[idx as usize] {
                continue;
            }
            let line = self.line(&self.point(idx), dir);
            if rank == want {
                return line;
            }
            for &p in &line.points {
                seen[p as usize] = true;
            }
            rank += 1;
        }
        unreachable!()
    }
}
