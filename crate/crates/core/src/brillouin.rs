//! Lattice Green coefficients `a_n = <e^{i n.k} / A(k)>` over the Brillouin zone.
//!
//! Averages are evaluated with the equal-weight periodic trapezoid rule on
//! `[-pi, pi]^d`. For frequencies off the real spectrum the integrand is
//! analytic and periodic, so the rule converges geometrically in the order.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::RwLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};

pub const DEFAULT_SINGULAR_FLOOR: f64 = 1e-6;

/// Integer lattice site or offset in `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Site(coords.into())
    }

    pub fn origin(dim: usize) -> Self {
        Site(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Representative with all components non-negative. The Green
    /// coefficients are even in every component, so this is the cache key.
    pub fn canonical(&self) -> Site {
        Site(self.0.iter().map(|c| c.abs()).collect())
    }

    /// `self - other`, componentwise.
    pub fn offset_from(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// The `2d` nearest neighbours.
    pub fn neighbors(&self) -> Vec<Site> {
        let mut out = Vec::with_capacity(2 * self.dim());
        for axis in 0..self.dim() {
            for step in [-1, 1] {
                let mut c = self.0.clone();
                c[axis] += step;
                out.push(Site(c));
            }
        }
        out
    }

    pub fn max_abs(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// Angular frequency of one source group, possibly complex (`alpha - i beta`).
///
/// `eps` is an explicit absorption shift: everything is evaluated at
/// `omega - i eps`. It is the only way to work with a frequency whose square
/// lies in the spectrum of the lattice Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencySpec {
    pub omega: Complex64,
    pub eps: f64,
}

impl FrequencySpec {
    pub fn new(omega: Complex64) -> Self {
        FrequencySpec { omega, eps: 0.0 }
    }

    pub fn shifted(omega: Complex64, eps: f64) -> Self {
        FrequencySpec { omega, eps }
    }

    /// The frequency actually used, `omega - i eps`.
    pub fn effective(&self) -> Complex64 {
        self.omega - Complex64::new(0.0, self.eps)
    }

    /// `2d - (omega s)^2`, the constant part of the symbol.
    pub fn symbol_shift(&self, slowness: f64, dim: usize) -> Complex64 {
        let ws = self.effective() * slowness;
        Complex64::new(2.0 * dim as f64, 0.0) - ws * ws
    }
}

/// `A(k) = 2d - (omega s)^2 - 2 sum_i cos k_i`.
pub fn symbol(k: &[f64], freq: &FrequencySpec, slowness: f64) -> Complex64 {
    let d = k.len();
    let cos_sum: f64 = k.iter().map(|ki| ki.cos()).sum();
    freq.symbol_shift(slowness, d) - 2.0 * cos_sum
}

/// Quadrature nodes `-pi + 2 pi l / order`, `l = 0..order`.
pub fn nodes(order: usize) -> Vec<f64> {
    (0..order)
        .map(|l| -PI + 2.0 * PI * l as f64 / order as f64)
        .collect()
}

/// Brillouin average `(2 pi)^{-d} \int f(k) dk` by the tensor trapezoid rule.
pub fn brillouin_average<F>(dim: usize, order: usize, f: F) -> Complex64
where
    F: Fn(&[f64]) -> Complex64,
{
    let ks = nodes(order);
    let total = order.pow(dim as u32);
    let mut k = vec![0.0; dim];
    let mut acc = Complex64::new(0.0, 0.0);
    for flat in 0..total {
        let mut rem = flat;
        for axis in (0..dim).rev() {
            k[axis] = ks[rem % order];
            rem /= order;
        }
        acc += f(&k);
    }
    acc / total as f64
}

/// Points per axis used when the caller does not choose.
pub fn default_order(dim: usize) -> usize {
    match dim {
        0..=2 => 256,
        3 => 64,
        _ => 16,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GreenConfig {
    pub order: Option<usize>,
    pub singular_floor: f64,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig {
            order: None,
            singular_floor: DEFAULT_SINGULAR_FLOOR,
        }
    }
}

struct InverseSymbol {
    values: Vec<Complex64>,
}

/// Residuals of the nearest-neighbour recurrence for both signs of the
/// Kronecker term: `|sum_{n'~n} a_n' - c a_n -/+ delta_n0|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborResiduals {
    /// Residual assuming `sum a_n' = c a_n + delta_n0`.
    pub plus: f64,
    /// Residual assuming `sum a_n' = c a_n - delta_n0`.
    pub minus: f64,
}

/// One line of a Green table dump; `freq` is zero based.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenEntry {
    pub freq: usize,
    pub offset: Site,
    pub value: Complex64,
}

/// Cached Green coefficients `a_n^j` for all frequencies of a scene.
pub struct GreenTable {
    dim: usize,
    slowness: f64,
    order: usize,
    freqs: Vec<FrequencySpec>,
    inverse: Vec<InverseSymbol>,
    entries: RwLock<HashMap<(usize, Site), Complex64>>,
}

impl std::fmt::Debug for GreenTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenTable")
            .field("dim", &self.dim)
            .field("slowness", &self.slowness)
            .field("order", &self.order)
            .field("freqs", &self.freqs)
            .field("cached", &self.len())
            .finish()
    }
}

impl GreenTable {
    pub fn new(
        dim: usize,
        slowness: f64,
        freqs: &[FrequencySpec],
        config: GreenConfig,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension(
                "lattice dimension must be at least 1".into(),
            ));
        }
        let order = config.order.unwrap_or_else(|| default_order(dim));
        if order < 4 {
            return Err(Error::Dimension(format!(
                "quadrature order {order} is below the minimum of 4"
            )));
        }
        let ks = nodes(order);
        let cos_k: Vec<f64> = ks.iter().map(|k| k.cos()).collect();
        let total = order.pow(dim as u32);

        let mut inverse = Vec::with_capacity(freqs.len());
        for (j, fs) in freqs.iter().enumerate() {
            let shift = fs.symbol_shift(slowness, dim);
            let mut min_abs = f64::INFINITY;
            let values: Vec<Complex64> = (0..total)
                .map(|flat| {
                    let mut rem = flat;
                    let mut cos_sum = 0.0;
                    for _ in 0..dim {
                        cos_sum += cos_k[rem % order];
                        rem /= order;
                    }
                    let a = shift - 2.0 * cos_sum;
                    min_abs = min_abs.min(a.norm());
                    a.inv()
                })
                .collect();
            if min_abs.is_nan() || min_abs < config.singular_floor {
                return Err(Error::NearSingularSymbol {
                    freq: j + 1,
                    min_abs,
                    floor: config.singular_floor,
                });
            }
            inverse.push(InverseSymbol { values });
        }

        Ok(GreenTable {
            dim,
            slowness,
            order,
            freqs: freqs.to_vec(),
            inverse,
            entries: RwLock::new(HashMap::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn slowness(&self) -> f64 {
        self.slowness
    }

    pub fn frequencies(&self) -> &[FrequencySpec] {
        &self.freqs
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("green cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_offset(&self, freq: usize, n: &Site) -> Result<()> {
        if freq >= self.freqs.len() {
            return Err(Error::Dimension(format!(
                "frequency index {} out of range",
                freq + 1
            )));
        }
        if n.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "offset {n} has dimension {}, expected {}",
                n.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Quadrature of `<cos(n_1 k_1) ... cos(n_d k_d) / A(k)>`, contracting one axis at a time.
    fn evaluate(&self, freq: usize, key: &Site) -> Complex64 {
        let q = self.order;
        let ks = nodes(q);
        let mut data: Vec<Complex64> = self.inverse[freq].values.clone();
        for axis in (0..self.dim).rev() {
            let n = key.0[axis] as f64;
            let weights: Vec<f64> = ks.iter().map(|k| (n * k).cos()).collect();
            data = data
                .chunks_exact(q)
                .map(|row| row.iter().zip(&weights).map(|(v, w)| v * w).sum())
                .collect();
        }
        data[0] / (q.pow(self.dim as u32) as f64)
    }

    /// Green coefficient `a_n^j` (zero-based frequency index), cached by canonical offset.
    pub fn coeff(&self, freq: usize, n: &Site) -> Result<Complex64> {
        self.check_offset(freq, n)?;
        let key = (freq, n.canonical());
        if let Some(v) = self.entries.read().expect("green cache poisoned").get(&key) {
            return Ok(*v);
        }
        let value = self.evaluate(freq, &key.1);
        self.entries
            .write()
            .expect("green cache poisoned")
            .insert(key, value);
        Ok(value)
    }

    /// Evaluate all missing coefficients for the given offsets in parallel.
    pub fn prefetch<'a, I>(&self, freq: usize, offsets: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a Site>,
    {
        let mut missing = Vec::new();
        {
            let cache = self.entries.read().expect("green cache poisoned");
            for n in offsets {
                self.check_offset(freq, n)?;
                let key = n.canonical();
                if !cache.contains_key(&(freq, key.clone())) {
                    missing.push(key);
                }
            }
        }
        missing.sort();
        missing.dedup();
        let computed: Vec<(Site, Complex64)> = missing
            .into_par_iter()
            .map(|key| {
                let v = self.evaluate(freq, &key);
                (key, v)
            })
            .collect();
        let mut cache = self.entries.write().expect("green cache poisoned");
        for (key, v) in computed {
            cache.entry((freq, key)).or_insert(v);
        }
        Ok(())
    }

    /// Matrix with entries `a_{cols_q - rows_p}`.
    pub fn block(&self, freq: usize, rows: &[Site], cols: &[Site]) -> Result<CMat> {
        let offsets: Vec<Site> = rows
            .iter()
            .flat_map(|r| cols.iter().map(move |c| c.offset_from(r)))
            .collect();
        self.prefetch(freq, &offsets)?;
        let mut m = CMat::zeros(rows.len(), cols.len());
        for (p, r) in rows.iter().enumerate() {
            for (q, c) in cols.iter().enumerate() {
                m[(p, q)] = self.coeff(freq, &c.offset_from(r))?;
            }
        }
        Ok(m)
    }

    /// Vector with entries `a_{source - sites_p}`.
    pub fn column(&self, freq: usize, sites: &[Site], source: &Site) -> Result<CVec> {
        let m = self.block(freq, sites, std::slice::from_ref(source))?;
        Ok(m.column(0).into_owned())
    }

    pub fn verify_neighbor_identity(&self, freq: usize, n: &Site) -> Result<NeighborResiduals> {
        self.check_offset(freq, n)?;
        let nbrs = n.neighbors();
        self.prefetch(freq, nbrs.iter().chain(std::iter::once(n)))?;
        let mut sum = Complex64::new(0.0, 0.0);
        for nb in &nbrs {
            sum += self.coeff(freq, nb)?;
        }
        let c = self.freqs[freq].symbol_shift(self.slowness, self.dim);
        let base = sum - c * self.coeff(freq, n)?;
        let delta = if n.is_origin() { 1.0 } else { 0.0 };
        Ok(NeighborResiduals {
            plus: (base - delta).norm(),
            minus: (base + delta).norm(),
        })
    }

    /// All cached entries, sorted by frequency then offset.
    pub fn entries(&self) -> Vec<GreenEntry> {
        let cache = self.entries.read().expect("green cache poisoned");
        let mut out: Vec<GreenEntry> = cache
            .iter()
            .map(|((freq, offset), value)| GreenEntry {
                freq: *freq,
                offset: offset.clone(),
                value: *value,
            })
            .collect();
        out.sort_by(|a, b| (a.freq, &a.offset).cmp(&(b.freq, &b.offset)));
        out
    }

    /// Text dump, one `j n_1 ... n_d re im` line per cached entry (`j` one based).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# dimension {} order {} slowness {:.16e}",
            self.dim, self.order, self.slowness
        );
        for e in self.entries() {
            let _ = write!(out, "{}", e.freq + 1);
            for c in &e.offset.0 {
                let _ = write!(out, " {c}");
            }
            let _ = writeln!(out, " {:.16e} {:.16e}", e.value.re, e.value.im);
        }
        out
    }

    /// Insert entries from a dump into the cache; returns the number of lines loaded.
    pub fn load_dump(&self, text: &str) -> Result<usize> {
        let parsed = parse_dump(text, self.dim)?;
        let mut cache = self.entries.write().expect("green cache poisoned");
        for e in &parsed {
            if e.freq >= self.freqs.len() {
                return Err(Error::Dimension(format!(
                    "frequency index {} out of range",
                    e.freq + 1
                )));
            }
            cache.insert((e.freq, e.offset.canonical()), e.value);
        }
        Ok(parsed.len())
    }
}

/// Parse a Green table dump. Blank lines and `#` comments are skipped.
pub fn parse_dump(text: &str, dim: usize) -> Result<Vec<GreenEntry>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |column: usize, message: String| Error::Parse {
            line: lineno + 1,
            column,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dim + 3 {
            return Err(err(
                1,
                format!("expected {} fields, found {}", dim + 3, fields.len()),
            ));
        }
        let freq: usize = fields[0]
            .parse()
            .map_err(|_| err(1, format!("bad frequency index {:?}", fields[0])))?;
        if freq == 0 {
            return Err(err(1, "frequency index is one based".into()));
        }
        let offset = fields[1..=dim]
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.parse::<i64>()
                    .map_err(|_| err(i + 2, format!("bad offset component {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let re: f64 = fields[dim + 1]
            .parse()
            .map_err(|_| err(dim + 2, "bad real part".into()))?;
        let im: f64 = fields[dim + 2]
            .parse()
            .map_err(|_| err(dim + 3, "bad imaginary part".into()))?;
        if !re.is_finite() || !im.is_finite() {
            return Err(err(dim + 2, "non-finite value".into()));
        }
        out.push(GreenEntry {
            freq: freq - 1,
            offset: Site(offset).canonical(),
            value: Complex64::new(re, im),
        });
    }
    Ok(out)
}
