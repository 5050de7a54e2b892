//! Problem instances: lattice parameters, sources grouped by frequency,
//! candidate defect sites, receivers, and optional measurements/defects.

use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64;
use serde::Deserialize;
use serde_json::Value;

use crate::brillouin::{FrequencySpec, Site};
use crate::doc;
use crate::error::{Error, Result};
use crate::linalg::CVec;

/// A point source of amplitude `amplitude` at `site`, radiating at frequency `freq` (zero based).
#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub freq: usize,
    pub site: Site,
    pub amplitude: Complex64,
}

/// Squared-slowness perturbations `s_n^2`, aligned with `Scene::defect_sites`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectVector(pub CVec);

impl DefectVector {
    pub fn zeros(n: usize) -> Self {
        DefectVector(CVec::zeros(n))
    }

    pub fn from_slice(values: &[Complex64]) -> Self {
        DefectVector(CVec::from_column_slice(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Receiver amplitudes `u_j`, one vector of length `R` per frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement(pub Vec<CVec>);

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub dimension: usize,
    pub background_slowness: f64,
    pub frequencies: Vec<FrequencySpec>,
    pub sources: Vec<Source>,
    pub defect_sites: Vec<Site>,
    pub receivers: Vec<Site>,
    pub measurements: Option<Measurement>,
    pub defects: Option<DefectVector>,
}

impl Scene {
    pub fn num_defects(&self) -> usize {
        self.defect_sites.len()
    }

    pub fn num_receivers(&self) -> usize {
        self.receivers.len()
    }

    pub fn num_frequencies(&self) -> usize {
        self.frequencies.len()
    }

    pub fn sources_for(&self, freq: usize) -> impl Iterator<Item = &Source> {
        self.sources.iter().filter(move |s| s.freq == freq)
    }

    /// Largest coordinate magnitude over sources, defect sites and receivers.
    pub fn max_coordinate(&self) -> i64 {
        self.sources
            .iter()
            .map(|s| &s.site)
            .chain(&self.defect_sites)
            .chain(&self.receivers)
            .map(Site::max_abs)
            .max()
            .unwrap_or(0)
    }
}

/// A broken standing assumption, tagged with the offending field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Violation {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// True when `(omega s)^2` is real and inside the spectrum `[0, 4d]` and no
/// absorption shift was supplied.
pub fn in_passband(freq: &FrequencySpec, slowness: f64, dim: usize) -> bool {
    if freq.eps != 0.0 {
        return false;
    }
    let ws = freq.omega * slowness;
    let z = ws * ws;
    let real = z.im.abs() <= 1e-12 * z.norm().max(1.0);
    real && z.re >= 0.0 && z.re <= 4.0 * dim as f64
}

fn duplicates(sites: &[Site]) -> Vec<&Site> {
    let mut seen = HashSet::new();
    let mut dups: Vec<&Site> = sites.iter().filter(|s| !seen.insert(*s)).collect();
    dups.sort();
    dups.dedup();
    dups
}

/// Check every standing assumption; the result is sorted so it does not
/// depend on the order of set-like fields.
pub fn validate_scene(scene: &Scene) -> Vec<Violation> {
    let mut out = Vec::new();
    let d = scene.dimension;
    if d == 0 {
        out.push(Violation::new("dimension", "dimension must be at least 1"));
    }
    let s = scene.background_slowness;
    if !(s.is_finite() && s > 0.0) {
        out.push(Violation::new(
            "background_slowness",
            "background slowness must be positive and finite",
        ));
    }

    if scene.frequencies.is_empty() {
        out.push(Violation::new(
            "frequencies",
            "at least one frequency is required",
        ));
    }
    for (i, a) in scene.frequencies.iter().enumerate() {
        if !(a.omega.re.is_finite() && a.omega.im.is_finite()) {
            out.push(Violation::new(
                "frequencies",
                format!("non-finite omega {}", a.omega),
            ));
            continue;
        }
        if !(a.eps.is_finite() && a.eps >= 0.0) {
            out.push(Violation::new(
                "frequencies",
                format!(
                    "absorption shift eps = {} must be finite and non-negative",
                    a.eps
                ),
            ));
            continue;
        }
        if scene.frequencies[..i]
            .iter()
            .any(|b| b.effective() == a.effective())
        {
            out.push(Violation::new(
                "frequencies",
                format!("frequencies not pairwise distinct (omega = {})", a.omega),
            ));
        }
        if d > 0 && in_passband(a, s, d) {
            out.push(Violation::new(
                "frequencies",
                format!(
                    "frequency in passband: (omega s)^2 = {} lies in [0, {}]",
                    (a.omega * s).powi(2).re,
                    4 * d
                ),
            ));
        }
    }

    let m = scene.frequencies.len();
    let mut seen_sources = HashSet::new();
    for src in &scene.sources {
        if src.freq >= m {
            out.push(Violation::new(
                "sources",
                format!("freq_index {} out of range 1..={m}", src.freq + 1),
            ));
        }
        if src.site.dim() != d {
            out.push(Violation::new(
                "sources",
                format!(
                    "site {} has dimension {}, expected {d}",
                    src.site,
                    src.site.dim()
                ),
            ));
        }
        if src.amplitude == Complex64::new(0.0, 0.0) {
            out.push(Violation::new(
                "sources",
                format!(
                    "zero source amplitude at site {} (freq_index {})",
                    src.site,
                    src.freq + 1
                ),
            ));
        } else if !(src.amplitude.re.is_finite() && src.amplitude.im.is_finite()) {
            out.push(Violation::new(
                "sources",
                format!("non-finite source amplitude at site {}", src.site),
            ));
        }
        if !seen_sources.insert((src.freq, &src.site)) {
            out.push(Violation::new(
                "sources",
                format!(
                    "duplicate source at site {} (freq_index {})",
                    src.site,
                    src.freq + 1
                ),
            ));
        }
    }

    for (field, sites) in [
        ("defect_sites", &scene.defect_sites),
        ("receivers", &scene.receivers),
    ] {
        for site in sites.iter().filter(|x| x.dim() != d) {
            out.push(Violation::new(
                field,
                format!("site {site} has dimension {}, expected {d}", site.dim()),
            ));
        }
        for site in duplicates(sites) {
            out.push(Violation::new(field, format!("duplicate site {site}")));
        }
    }

    if let Some(meas) = &scene.measurements {
        if meas.0.len() != m {
            out.push(Violation::new(
                "measurements",
                format!(
                    "expected one vector per frequency ({m}), found {}",
                    meas.0.len()
                ),
            ));
        }
        for (j, u) in meas.0.iter().enumerate() {
            if u.len() != scene.receivers.len() {
                out.push(Violation::new(
                    "measurements",
                    format!(
                        "freq_index {} has {} values, expected {}",
                        j + 1,
                        u.len(),
                        scene.receivers.len()
                    ),
                ));
            }
        }
    }
    if let Some(def) = &scene.defects {
        if def.len() != scene.defect_sites.len() {
            out.push(Violation::new(
                "defects",
                format!(
                    "{} values for {} defect sites",
                    def.len(),
                    scene.defect_sites.len()
                ),
            ));
        }
    }

    out.sort();
    out.dedup();
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrequencyDoc {
    omega: [f64; 2],
    #[serde(default)]
    eps: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceDoc {
    freq_index: usize,
    site: Vec<i64>,
    amplitude: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementDoc {
    freq_index: usize,
    values: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    dimension: usize,
    background_slowness: f64,
    frequencies: Vec<FrequencyDoc>,
    sources: Vec<SourceDoc>,
    defect_sites: Vec<Vec<i64>>,
    receivers: Vec<Vec<i64>>,
    #[serde(default)]
    measurements: Option<Vec<MeasurementDoc>>,
    #[serde(default)]
    defects: Option<Vec<[f64; 2]>>,
}

fn c(pair: [f64; 2]) -> Complex64 {
    Complex64::new(pair[0], pair[1])
}

fn from_doc(d: SceneDoc) -> Result<Scene> {
    let m = d.frequencies.len();
    let mut violations = Vec::new();
    let mut sources = Vec::with_capacity(d.sources.len());
    for s in d.sources {
        if s.freq_index == 0 {
            violations.push(Violation::new("sources", "freq_index is one based"));
            continue;
        }
        sources.push(Source {
            freq: s.freq_index - 1,
            site: Site(s.site),
            amplitude: c(s.amplitude),
        });
    }
    let measurements = match d.measurements {
        None => None,
        Some(list) => {
            let mut per_freq: Vec<Option<CVec>> = vec![None; m];
            for entry in list {
                if entry.freq_index == 0 || entry.freq_index > m {
                    violations.push(Violation::new(
                        "measurements",
                        format!("freq_index {} out of range 1..={m}", entry.freq_index),
                    ));
                    continue;
                }
                let slot = &mut per_freq[entry.freq_index - 1];
                if slot.is_some() {
                    violations.push(Violation::new(
                        "measurements",
                        format!("duplicate freq_index {}", entry.freq_index),
                    ));
                }
                *slot = Some(CVec::from_iterator(
                    entry.values.len(),
                    entry.values.into_iter().map(c),
                ));
            }
            let mut vecs = Vec::with_capacity(m);
            for (j, v) in per_freq.into_iter().enumerate() {
                match v {
                    Some(v) => vecs.push(v),
                    None => violations.push(Violation::new(
                        "measurements",
                        format!("missing freq_index {}", j + 1),
                    )),
                }
            }
            Some(Measurement(vecs))
        }
    };
    if !violations.is_empty() {
        violations.sort();
        return Err(Error::Validation(violations));
    }
    Ok(Scene {
        dimension: d.dimension,
        background_slowness: d.background_slowness,
        frequencies: d
            .frequencies
            .into_iter()
            .map(|f| FrequencySpec::shifted(c(f.omega), f.eps))
            .collect(),
        sources,
        defect_sites: d.defect_sites.into_iter().map(Site).collect(),
        receivers: d.receivers.into_iter().map(Site).collect(),
        measurements,
        defects: d
            .defects
            .map(|v| DefectVector(CVec::from_iterator(v.len(), v.into_iter().map(c)))),
    })
}

/// Parse and validate a scene document.
pub fn load_scene(text: &str) -> Result<Scene> {
    let raw: SceneDoc = serde_json::from_str(text).map_err(doc::parse_error)?;
    let scene = from_doc(raw)?;
    let violations = validate_scene(&scene);
    if violations.is_empty() {
        Ok(scene)
    } else {
        Err(Error::Validation(violations))
    }
}

pub fn scene_value(scene: &Scene) -> Value {
    let mut fields = vec![
        ("dimension", Value::from(scene.dimension)),
        ("background_slowness", doc::sci(scene.background_slowness)),
        (
            "frequencies",
            Value::Array(
                scene
                    .frequencies
                    .iter()
                    .map(|f| {
                        let mut entry = vec![("omega", doc::complex(f.omega))];
                        if f.eps != 0.0 {
                            entry.push(("eps", doc::sci(f.eps)));
                        }
                        doc::object(entry)
                    })
                    .collect(),
            ),
        ),
        (
            "sources",
            Value::Array(
                scene
                    .sources
                    .iter()
                    .map(|s| {
                        doc::object(vec![
                            ("freq_index", Value::from(s.freq + 1)),
                            ("site", doc::site(&s.site)),
                            ("amplitude", doc::complex(s.amplitude)),
                        ])
                    })
                    .collect(),
            ),
        ),
        ("defect_sites", doc::sites(&scene.defect_sites)),
        ("receivers", doc::sites(&scene.receivers)),
    ];
    if let Some(meas) = &scene.measurements {
        fields.push((
            "measurements",
            Value::Array(
                meas.0
                    .iter()
                    .enumerate()
                    .map(|(j, u)| {
                        doc::object(vec![
                            ("freq_index", Value::from(j + 1)),
                            ("values", doc::complex_list(u.iter())),
                        ])
                    })
                    .collect(),
            ),
        ));
    }
    if let Some(def) = &scene.defects {
        fields.push(("defects", doc::complex_list(def.0.iter())));
    }
    doc::object(fields)
}

pub fn save_scene(scene: &Scene) -> String {
    doc::to_text(&scene_value(scene))
}
