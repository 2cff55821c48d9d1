//! Procedural "phantom head" cross-sections with the 8-class label scheme.
//!
//! Slices are samples of a virtual head axis `t ∈ [0, 1]` running from the
//! jaw (t = 0) to the crown (t = 1). Image rows grow towards the back of
//! the head, so anterior structures sit near the top of each slice. Every
//! structure is an ellipse (or elliptical ring/arc) whose size depends
//! smoothly on `t`, so neighbouring slices are strongly correlated.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::labels::{Class, LabelMap};
use crate::net::INPUT_MULTIPLE;
use crate::tensor::Tensor;

use super::Slice;

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomParams {
    pub image_size: usize,
    pub n_slices: usize,
    pub seed: u64,
    /// Global multiplier on every structure's size.
    pub anatomy_scale: f64,
    /// Slow slice-to-slice wobble of the head position, as a fraction of the image size.
    pub jitter: f64,
    /// Half-width of the uniform per-pixel colour noise, in `[0, 1]` units.
    pub noise: f64,
    /// Enlarges the anatomy and recolours tissue to emulate a second,
    /// differently acquired specimen.
    pub shift: bool,
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self {
            image_size: 96,
            n_slices: 64,
            seed: 7,
            anatomy_scale: 1.0,
            jitter: 0.02,
            noise: 0.05,
            shift: false,
        }
    }
}

impl PhantomParams {
    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || !self.image_size.is_multiple_of(INPUT_MULTIPLE) {
            return Err(Error::Parameter(format!(
                "image_size must be a positive multiple of {INPUT_MULTIPLE}, got {}",
                self.image_size
            )));
        }
        if self.n_slices < 2 {
            return Err(Error::Parameter(format!(
                "n_slices must be >= 2, got {}",
                self.n_slices
            )));
        }
        let finite = [self.anatomy_scale, self.jitter, self.noise].iter().all(|v| v.is_finite());
        if !finite || self.anatomy_scale <= 0.0 || self.jitter < 0.0 || !(0.0..=0.5).contains(&self.noise) {
            return Err(Error::Parameter(
                "anatomy_scale must be > 0, jitter >= 0 and noise in [0, 0.5]".into(),
            ));
        }
        Ok(())
    }
}

/// Base RGB colour per class; background has a second colour for soft tissue.
const AIR: [f64; 3] = [0.08, 0.08, 0.10];
const SOFT_TISSUE: [f64; 3] = [0.74, 0.55, 0.47];
const TISSUE_COLORS: [[f64; 3]; 8] = [
    AIR,
    [0.90, 0.86, 0.76], // skull
    [0.99, 0.98, 0.90], // teeth
    [0.88, 0.74, 0.66], // cerebrum
    [0.64, 0.42, 0.38], // cerebellum
    [0.24, 0.14, 0.14], // nasal cavities
    [0.46, 0.47, 0.56], // eyeballs
    [0.96, 0.84, 0.34], // lenses
];

#[derive(Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
}

impl Ellipse {
    /// Squared normalized radius of `(x, y)`; `< 1` inside.
    fn rho(&self, x: f64, y: f64) -> f64 {
        let dx = (x - self.cx) / self.rx;
        let dy = (y - self.cy) / self.ry;
        dx * dx + dy * dy
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        self.rho(x, y) < 1.0
    }

    fn scaled(&self, f: f64) -> Self {
        Self {
            rx: self.rx * f,
            ry: self.ry * f,
            ..*self
        }
    }
}

/// Smooth bump that is 1 at the middle of `[lo, hi]` and 0 outside it.
fn window(t: f64, lo: f64, hi: f64) -> f64 {
    if t <= lo || t >= hi {
        return 0.0;
    }
    let u = (t - lo) / (hi - lo) * 2.0 - 1.0;
    (1.0 - u * u).sqrt()
}

struct Anatomy {
    size: f64,
    scale: f64,
}

impl Anatomy {
    fn label_at(&self, t: f64, head: &Ellipse, x: f64, y: f64) -> (Class, bool) {
        let s = self.size * self.scale;
        if !head.contains(x, y) {
            return (Class::Background, false);
        }
        let inner = head.scaled(0.84);
        if !inner.contains(x, y) {
            return if head.scaled(0.94).contains(x, y) {
                (Class::Skull, true)
            } else {
                (Class::Background, true)
            };
        }
        let (cx, cy) = (head.cx, head.cy);

        let eye_r = 0.085 * s * window(t, 0.32, 0.68).sqrt();
        let lens_r = 0.042 * s * window(t, 0.38, 0.62).sqrt();
        for side in [-1.0, 1.0] {
            let (ex, ey) = (cx + side * 0.17 * s, cy - 0.25 * s);
            if lens_r > 0.0 {
                let lens = Ellipse { cx: ex, cy: ey - 0.55 * eye_r, rx: lens_r, ry: lens_r * 0.8 };
                if lens.contains(x, y) {
                    return (Class::Lenses, true);
                }
            }
            if eye_r > 0.0 && (Ellipse { cx: ex, cy: ey, rx: eye_r, ry: eye_r }).contains(x, y) {
                return (Class::Eyeballs, true);
            }
        }

        let nasal = window(t, 0.10, 0.46);
        if nasal > 0.0 {
            for side in [-1.0, 1.0] {
                let cavity = Ellipse {
                    cx: cx + side * 0.055 * s,
                    cy: cy - 0.22 * s,
                    rx: 0.04 * s * (0.5 + 0.5 * nasal),
                    ry: 0.09 * s * (0.5 + 0.5 * nasal),
                };
                if cavity.contains(x, y) {
                    return (Class::NasalCavities, true);
                }
            }
        }

        let teeth = window(t, -0.02, 0.24);
        if teeth > 0.0 {
            let arch = Ellipse { cx, cy: cy - 0.02 * s, rx: 0.25 * s, ry: 0.27 * s };
            let rho = arch.rho(x, y);
            let band = 0.22 * (0.6 + 0.4 * teeth);
            if y < arch.cy && rho < 1.0 && rho > (1.0 - band) * (1.0 - band) {
                return (Class::Teeth, true);
            }
        }

        let cerebellum = window(t, 0.22, 0.60);
        if cerebellum > 0.0 {
            let lobe = Ellipse {
                cx,
                cy: cy + 0.2 * s,
                rx: 0.22 * s * (0.5 + 0.5 * cerebellum),
                ry: 0.13 * s * (0.5 + 0.5 * cerebellum),
            };
            if lobe.contains(x, y) {
                return (Class::Cerebellum, true);
            }
        }

        if t >= 0.45 && inner.scaled(0.96).contains(x, y) {
            return (Class::Cerebrum, true);
        }
        (Class::Background, true)
    }
}

/// Generates `n_slices` image/label pairs; a pure function of `params`.
pub fn generate_phantom(params: &PhantomParams) -> Result<Vec<Slice>> {
    params.validate()?;
    let size = params.image_size as f64;
    let mut master = Xoshiro256PlusPlus::seed_from_u64(params.seed);
    // Slow wobble shared by all slices of one run.
    let phases: [f64; 4] = std::array::from_fn(|_| master.random_range(0.0..std::f64::consts::TAU));
    let shift_scale = if params.shift { 1.1 } else { 1.0 };
    let anatomy = Anatomy {
        size,
        scale: params.anatomy_scale * shift_scale,
    };
    let colors = tissue_colors(params.shift);

    (0..params.n_slices)
        .map(|i| {
            let t = i as f64 / (params.n_slices - 1) as f64;
            let mut rng = master.clone();
            for _ in 0..=i {
                rng.jump();
            }
            let wobble = |k: usize| (std::f64::consts::TAU * t + phases[k]).sin();
            let profile = 0.78 + 0.22 * (std::f64::consts::PI * (0.15 + 0.8 * t)).sin();
            let s = anatomy.scale * size;
            let head = Ellipse {
                cx: size / 2.0 + params.jitter * size * wobble(0),
                cy: size / 2.0 + params.jitter * size * wobble(1),
                rx: 0.40 * s * profile * (1.0 + 0.5 * params.jitter * wobble(2)),
                ry: 0.45 * s * profile * (1.0 + 0.5 * params.jitter * wobble(3)),
            };

            let n = params.image_size;
            let plane = n * n;
            let mut labels = LabelMap::filled(n, n, 0);
            let mut image = vec![0.0; 3 * plane];
            for r in 0..n {
                for c in 0..n {
                    let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
                    let (class, inside) = anatomy.label_at(t, &head, x, y);
                    labels.set(r, c, class as u8);
                    let base = match class {
                        Class::Background if inside => colors.soft_tissue,
                        _ => colors.tissue[class as usize],
                    };
                    for ch in 0..3 {
                        let noise = if params.noise > 0.0 {
                            rng.random_range(-params.noise..=params.noise)
                        } else {
                            0.0
                        };
                        // Quantized so the in-memory slice equals its PPM encoding.
                        let v = (base[ch] + noise).clamp(0.0, 1.0);
                        image[ch * plane + r * n + c] = (v * 255.0).round() / 255.0;
                    }
                }
            }
            Ok(Slice {
                id: format!("slice_{i:03}"),
                image: Tensor::from_values(&[3, n, n], image)?,
                labels,
            })
        })
        .collect()
}

struct Palette {
    soft_tissue: [f64; 3],
    tissue: [[f64; 3]; 8],
}

fn tissue_colors(shift: bool) -> Palette {
    if !shift {
        return Palette {
            soft_tissue: SOFT_TISSUE,
            tissue: TISSUE_COLORS,
        };
    }
    // Warmer, darker specimen with a lighter background.
    let recolor = |c: [f64; 3]| [c[0] * 0.95 + 0.04, c[1] * 0.86 + 0.02, c[2] * 0.82 + 0.02];
    let mut tissue = TISSUE_COLORS.map(recolor);
    tissue[0] = [0.16, 0.15, 0.14];
    Palette {
        soft_tissue: recolor(SOFT_TISSUE),
        tissue,
    }
}
