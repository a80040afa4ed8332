use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Result, Sample};
use crate::rng::{salt, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Class blob centers on a regular grid covering the image.
    #[default]
    Spread,
    /// Class `k` confined to quadrant `k mod 4` (top-left, top-right,
    /// bottom-left, bottom-right); requires at most four classes.
    Quadrant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }

    fn tag(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }
}

/// Gaussian-blob images: each class has a blob center and per-channel color,
/// each identity a fixed offset from its class center, each view a further
/// positional jitter plus pixel noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    /// Held-out views per class; defaults to `per_class`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_per_class: Option<usize>,
    #[serde(default = "one")]
    pub identities_per_class: usize,
    /// `[C, H, W]`.
    pub image: [usize; 3],
    #[serde(default = "default_sigma")]
    pub blob_sigma: f64,
    /// Maximum positional offset in pixels, per axis.
    #[serde(default = "one_f")]
    pub jitter: f64,
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub layout: Layout,
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn default_sigma() -> f64 {
    2.0
}
fn default_noise() -> f64 {
    0.05
}

impl SyntheticSpec {
    pub fn new(classes: usize, per_class: usize, image: [usize; 3], seed: u64) -> Self {
        Self {
            classes,
            per_class,
            test_per_class: None,
            identities_per_class: 1,
            image,
            blob_sigma: default_sigma(),
            jitter: 1.0,
            noise_sigma: default_noise(),
            seed,
            layout: Layout::Spread,
        }
    }

    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.per_class,
            Split::Test => self.test_per_class.unwrap_or(self.per_class),
        }
    }

    /// Checks the generator parameters; errors carry the offending key.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let err = |k: &str, m: String| Err((k.to_string(), m));
        if self.classes < 2 {
            return err("classes", format!("{} must be >= 2", self.classes));
        }
        if self.identities_per_class == 0 {
            return err("identities_per_class", "must be >= 1".into());
        }
        if self.per_class < 4 * self.identities_per_class {
            return err(
                "per_class",
                format!(
                    "{} must give every identity at least 4 views ({} identities per class)",
                    self.per_class, self.identities_per_class
                ),
            );
        }
        if self.test_per_class == Some(0) {
            return err("test_per_class", "must be >= 1".into());
        }
        if self.image.contains(&0) {
            return err("image", format!("{:?} has a zero extent", self.image));
        }
        if !(self.blob_sigma > 0.0 && self.blob_sigma.is_finite()) {
            return err("blob_sigma", format!("{} must be > 0", self.blob_sigma));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return err("jitter", format!("{} must be >= 0", self.jitter));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return err("noise_sigma", format!("{} must be >= 0", self.noise_sigma));
        }
        if self.layout == Layout::Quadrant {
            if self.classes > 4 {
                return err("layout", format!("quadrant layout allows at most 4 classes, got {}", self.classes));
            }
            if self.image[1] < 2 || self.image[2] < 2 {
                return err("image", "quadrant layout needs H, W >= 2".into());
            }
        }
        Ok(())
    }

    /// Blob center `(row, col)` of class `k` in continuous pixel coordinates.
    pub fn class_center(&self, k: usize) -> (f64, f64) {
        let (h, w) = (self.image[1] as f64, self.image[2] as f64);
        match self.layout {
            Layout::Spread => {
                let g = (self.classes as f64).sqrt().ceil() as usize;
                let (r, c) = (k / g, k % g);
                ((r as f64 + 0.5) * h / g as f64, (c as f64 + 0.5) * w / g as f64)
            }
            Layout::Quadrant => {
                let (r, c) = self.quadrant_bounds(k);
                ((r.0 + r.1) / 2.0, (c.0 + c.1) / 2.0)
            }
        }
    }

    /// Row and column ranges `[lo, hi)` of the quadrant holding class `k`.
    pub fn quadrant_bounds(&self, k: usize) -> ((f64, f64), (f64, f64)) {
        let (h, w) = (self.image[1] as f64, self.image[2] as f64);
        let q = k % 4;
        let rows = if q < 2 { (0.0, h / 2.0) } else { (h / 2.0, h) };
        let cols = if q.is_multiple_of(2) { (0.0, w / 2.0) } else { (w / 2.0, w) };
        (rows, cols)
    }

    /// Per-channel amplitude of class `k`.
    pub fn class_color(&self, k: usize) -> Vec<f64> {
        let c = self.image[0];
        if c == 1 {
            return vec![1.0];
        }
        (0..c)
            .map(|ch| {
                let phase = k as f64 / self.classes as f64 + ch as f64 / c as f64;
                0.6 + 0.4 * (std::f64::consts::TAU * phase).cos()
            })
            .collect()
    }
}

/// Deterministically renders one split.
///
/// Samples are class-major; sample `j` of class `k` shows identity
/// `k·identities_per_class + j mod identities_per_class`. Train and test
/// draw different views of the same identities.
pub fn generate(spec: &SyntheticSpec, split: Split) -> Result<Dataset> {
    spec.validate().map_err(|(k, m)| DataError::Invalid(format!("{k}: {m}")))?;
    let [ch, h, w] = spec.image;
    let ipc = spec.identities_per_class;
    let n = spec.count(split);
    let mut samples = Vec::with_capacity(spec.classes * n);
    for k in 0..spec.classes {
        let base = spec.class_center(k);
        let color = spec.class_color(k);
        let offsets: Vec<(f64, f64)> = (0..ipc)
            .map(|i| {
                if ipc == 1 {
                    return (0.0, 0.0);
                }
                let mut rng = stream(spec.seed, &[salt::CLASSES, k as u64, i as u64]);
                (uniform(&mut rng, spec.jitter), uniform(&mut rng, spec.jitter))
            })
            .collect();
        for j in 0..n {
            let id = j % ipc;
            let mut rng = stream(spec.seed, &[salt::SAMPLES, split.tag(), k as u64, j as u64]);
            let mut cy = base.0 + offsets[id].0 + uniform(&mut rng, spec.jitter);
            let mut cx = base.1 + offsets[id].1 + uniform(&mut rng, spec.jitter);
            if spec.layout == Layout::Quadrant {
                let (r, c) = spec.quadrant_bounds(k);
                cy = cy.clamp(r.0, r.1);
                cx = cx.clamp(c.0, c.1);
            }
            let two_s2 = 2.0 * spec.blob_sigma * spec.blob_sigma;
            let mut pixels = Vec::with_capacity(ch * h * w);
            for amp in &color {
                for y in 0..h {
                    for x in 0..w {
                        let dy = y as f64 + 0.5 - cy;
                        let dx = x as f64 + 0.5 - cx;
                        let mut v = amp * (-(dy * dy + dx * dx) / two_s2).exp();
                        if spec.noise_sigma > 0.0 {
                            let z: f64 = rng.sample(StandardNormal);
                            v += spec.noise_sigma * z;
                        }
                        pixels.push(v.clamp(0.0, 1.0) as f32);
                    }
                }
            }
            samples.push(Sample {
                class: k as u32,
                identity: (k * ipc + id) as u32,
                pixels,
            });
        }
    }
    Ok(Dataset {
        classes: spec.classes,
        per_class: n,
        image: spec.image,
        samples,
    })
}

fn uniform(rng: &mut impl Rng, half_width: f64) -> f64 {
    if half_width == 0.0 {
        return 0.0;
    }
    rng.random_range(-half_width..=half_width)
}
