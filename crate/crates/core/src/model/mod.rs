//! Architecture presets, parameter containers and initialization.
//!
//! Activations are indexed so that `0` is the input feature map and `k + 1`
//! is the output of layer `k`. Skip connections add (optionally projected)
//! activation `source` onto activation `sink`.

mod weights;

pub use weights::{load_weights, read_weights, save_weights, write_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{BatchNorm, Linear, SplineKernel};

pub const DEFAULT_VOXELS: [usize; 3] = [12, 16, 16];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerConfig {
    SplineConv { m_in: usize, m_out: usize, kernel_size: usize, degree: usize },
    Elu,
    BatchNorm { width: usize },
    MaxPool { voxels: [usize; 3] },
    /// Per-node affine map.
    Linear { m_in: usize, m_out: usize, bias: bool },
}

impl LayerConfig {
    /// Output width given the input width, or `None` if they are inconsistent.
    pub fn output_width(&self, width_in: usize) -> Option<usize> {
        match *self {
            LayerConfig::SplineConv { m_in, m_out, .. } | LayerConfig::Linear { m_in, m_out, .. } => {
                (m_in == width_in).then_some(m_out)
            }
            LayerConfig::BatchNorm { width } => (width == width_in).then_some(width),
            LayerConfig::Elu | LayerConfig::MaxPool { .. } => Some(width_in),
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            LayerConfig::SplineConv { .. } => "conv",
            LayerConfig::Elu => "elu",
            LayerConfig::BatchNorm { .. } => "bn",
            LayerConfig::MaxPool { .. } => "pool",
            LayerConfig::Linear { .. } => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipConfig {
    pub source: usize,
    pub sink: usize,
    /// Bias-free linear map applied to the source; required when widths differ.
    pub projection: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub preset: String,
    pub input_width: usize,
    pub layers: Vec<LayerConfig>,
    pub skips: Vec<SkipConfig>,
    pub classes: usize,
}

fn block(layers: &mut Vec<LayerConfig>, m_in: usize, m_out: usize, kernel_size: usize) {
    layers.push(LayerConfig::SplineConv { m_in, m_out, kernel_size, degree: 1 });
    layers.push(LayerConfig::Elu);
    layers.push(LayerConfig::BatchNorm { width: m_out });
}

fn ladder(name: &str, channels: [usize; 7], kernel_size: usize, classes: usize) -> ArchitectureConfig {
    let mut layers = Vec::new();
    let mut skips = Vec::new();
    let mut width = 1;
    for (k, &m_out) in channels.iter().enumerate() {
        let block_input = layers.len();
        block(&mut layers, width, m_out, kernel_size);
        // skips around the fourth and fifth blocks
        if k == 3 || k == 4 {
            skips.push(SkipConfig { source: block_input, sink: layers.len(), projection: width != m_out });
        }
        width = m_out;
        if k == 4 || k == 6 {
            layers.push(LayerConfig::MaxPool { voxels: DEFAULT_VOXELS });
        }
    }
    ArchitectureConfig { preset: name.to_string(), input_width: 1, layers, skips, classes }
}

/// Named architecture. `recognition` is the small binary classifier,
/// `detection` the wide backbone with a `2 + 5` output readout.
pub fn preset(name: &str) -> Result<ArchitectureConfig> {
    match name {
        "recognition" => Ok(ladder(name, [8, 16, 16, 16, 32, 32, 32], 2, 2)),
        "detection" => Ok(ladder(name, [16, 32, 32, 32, 128, 128, 128], 8, 2 + 5)),
        other => Err(Error::Lookup(format!("unknown preset '{other}' (expected recognition or detection)"))),
    }
}

impl ArchitectureConfig {
    /// Same architecture with every convolution using spline degree `degree`.
    pub fn with_degree(mut self, degree: usize) -> Self {
        for layer in &mut self.layers {
            if let LayerConfig::SplineConv { degree: d, .. } = layer {
                *d = degree;
            }
        }
        self
    }

    pub fn with_voxels(mut self, voxels: [usize; 3]) -> Self {
        for layer in &mut self.layers {
            if let LayerConfig::MaxPool { voxels: v } = layer {
                *v = voxels;
            }
        }
        self
    }

    pub fn conv_channels(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                LayerConfig::SplineConv { m_out, .. } => Some(*m_out),
                _ => None,
            })
            .collect()
    }

    pub fn kernel_size(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| match l {
            LayerConfig::SplineConv { kernel_size, .. } => Some(*kernel_size),
            _ => None,
        })
    }

    /// Layer names numbered per kind: `conv1`, `elu1`, `bn1`, `conv2`, ...
    pub fn layer_names(&self) -> Vec<String> {
        let mut counts = std::collections::HashMap::new();
        self.layers
            .iter()
            .map(|l| {
                let n = counts.entry(l.short_name()).or_insert(0usize);
                *n += 1;
                format!("{}{}", l.short_name(), n)
            })
            .collect()
    }

    /// Width of every activation, index 0 being the input.
    pub fn activation_widths(&self) -> Result<Vec<usize>> {
        let mut widths = vec![self.input_width];
        for (k, layer) in self.layers.iter().enumerate() {
            let w = *widths.last().expect("non-empty");
            let out = layer.output_width(w).ok_or_else(|| {
                Error::Shape(format!("layer {k} ({}) expects a different input width than {w}", layer.short_name()))
            })?;
            widths.push(out);
        }
        Ok(widths)
    }

    /// Pooling depth of every activation.
    pub fn activation_levels(&self) -> Vec<usize> {
        let mut levels = vec![0];
        let mut level = 0;
        for layer in &self.layers {
            if matches!(layer, LayerConfig::MaxPool { .. }) {
                level += 1;
            }
            levels.push(level);
        }
        levels
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.classes == 0 {
            return Err(Error::InvalidParameter("input width and class count must be positive".into()));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            let bad = match *layer {
                LayerConfig::SplineConv { m_in, m_out, kernel_size, degree } => {
                    m_in == 0 || m_out == 0 || kernel_size < 2 || !(1..=crate::nn::MAX_DEGREE).contains(&degree)
                }
                LayerConfig::BatchNorm { width } => width == 0,
                LayerConfig::MaxPool { voxels } => voxels.contains(&0),
                LayerConfig::Linear { m_in, m_out, .. } => m_in == 0 || m_out == 0,
                LayerConfig::Elu => false,
            };
            if bad {
                return Err(Error::InvalidParameter(format!("layer {k} has invalid parameters: {layer:?}")));
            }
        }
        let widths = self.activation_widths()?;
        let levels = self.activation_levels();
        let mut sinks = std::collections::HashSet::new();
        for s in &self.skips {
            if s.source >= s.sink || s.sink >= widths.len() {
                return Err(Error::Shape(format!("skip {}->{} must point forward within the network", s.source, s.sink)));
            }
            if s.sink == 0 || !sinks.insert(s.sink) {
                return Err(Error::Shape(format!("activation {} receives more than one skip", s.sink)));
            }
            if levels[s.source] != levels[s.sink] {
                return Err(Error::Shape(format!("skip {}->{} crosses a pooling layer", s.source, s.sink)));
            }
            if !s.projection && widths[s.source] != widths[s.sink] {
                return Err(Error::Shape(format!(
                    "skip {}->{} joins widths {} and {} without a projection",
                    s.source, s.sink, widths[s.source], widths[s.sink]
                )));
            }
        }
        Ok(())
    }

    pub fn output_width(&self) -> Result<usize> {
        Ok(*self.activation_widths()?.last().expect("non-empty"))
    }
}

/// Concrete parameters of one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    SplineConv(SplineKernel),
    Elu,
    BatchNorm(BatchNorm),
    MaxPool([usize; 3]),
    Linear(Linear),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ArchitectureConfig,
    layers: Vec<LayerParams>,
    /// One entry per skip; `Some` for projected skips.
    projections: Vec<Option<Linear>>,
    head: Linear,
}

impl Model {
    /// Assembles a model, checking every tensor against `config`.
    pub fn new(
        config: ArchitectureConfig,
        layers: Vec<LayerParams>,
        projections: Vec<Option<Linear>>,
        head: Linear,
    ) -> Result<Self> {
        config.validate()?;
        let widths = config.activation_widths()?;
        if layers.len() != config.layers.len() {
            return Err(Error::Shape(format!("{} layer tensors for {} layers", layers.len(), config.layers.len())));
        }
        for (k, (cfg, p)) in config.layers.iter().zip(&layers).enumerate() {
            let ok = match (cfg, p) {
                (LayerConfig::SplineConv { m_in, m_out, kernel_size, degree }, LayerParams::SplineConv(kern)) => {
                    kern.m_in() == *m_in
                        && kern.m_out() == *m_out
                        && kern.basis().kernel_size() == *kernel_size
                        && kern.basis().degree() == *degree
                }
                (LayerConfig::Elu, LayerParams::Elu) => true,
                (LayerConfig::BatchNorm { width }, LayerParams::BatchNorm(bn)) => {
                    bn.validate()?;
                    bn.width() == *width
                }
                (LayerConfig::MaxPool { voxels }, LayerParams::MaxPool(v)) => voxels == v,
                (LayerConfig::Linear { m_in, m_out, bias }, LayerParams::Linear(lin)) => {
                    lin.m_in == *m_in && lin.m_out == *m_out && lin.bias.is_some() == *bias
                }
                _ => false,
            };
            if !ok {
                return Err(Error::Shape(format!("layer {k} ({}) parameters do not match its config", cfg.short_name())));
            }
        }
        if projections.len() != config.skips.len() {
            return Err(Error::Shape(format!("{} projections for {} skips", projections.len(), config.skips.len())));
        }
        for (s, p) in config.skips.iter().zip(&projections) {
            let ok = match p {
                None => !s.projection,
                Some(lin) => {
                    s.projection && lin.m_in == widths[s.source] && lin.m_out == widths[s.sink] && lin.bias.is_none()
                }
            };
            if !ok {
                return Err(Error::Shape(format!("skip {}->{} projection does not match its config", s.source, s.sink)));
            }
        }
        let last = *widths.last().expect("non-empty");
        if head.m_in != last || head.m_out != config.classes {
            return Err(Error::Shape(format!(
                "head maps {}->{}, expected {last}->{}",
                head.m_in, head.m_out, config.classes
            )));
        }
        Ok(Model { config, layers, projections, head })
    }

    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn projections(&self) -> &[Option<Linear>] {
        &self.projections
    }

    pub fn head(&self) -> &Linear {
        &self.head
    }

    /// Deterministic uniform initialization in `[-a, a]`,
    /// `a = sqrt(6 / (fan_in + fan_out))` with fans counted in channels.
    /// Biases start at zero; batch norms start as identities.
    pub fn random_init(config: &ArchitectureConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let widths = config.activation_widths()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(config.layers.len());
        for cfg in &config.layers {
            layers.push(match *cfg {
                LayerConfig::SplineConv { m_in, m_out, kernel_size, degree } => {
                    let n = kernel_size.pow(3) * m_in * m_out;
                    let w = uniform(&mut rng, n, init_bound(m_in, m_out));
                    LayerParams::SplineConv(SplineKernel::new(m_in, m_out, kernel_size, degree, w)?)
                }
                LayerConfig::Elu => LayerParams::Elu,
                LayerConfig::BatchNorm { width } => LayerParams::BatchNorm(BatchNorm::identity(width)),
                LayerConfig::MaxPool { voxels } => LayerParams::MaxPool(voxels),
                LayerConfig::Linear { m_in, m_out, bias } => {
                    let w = uniform(&mut rng, m_in * m_out, init_bound(m_in, m_out));
                    LayerParams::Linear(Linear::new(m_in, m_out, w, bias.then(|| vec![0.0; m_out]))?)
                }
            });
        }
        let mut projections = Vec::with_capacity(config.skips.len());
        for s in &config.skips {
            projections.push(if s.projection {
                let (i, o) = (widths[s.source], widths[s.sink]);
                Some(Linear::new(i, o, uniform(&mut rng, i * o, init_bound(i, o)), None)?)
            } else {
                None
            });
        }
        let last = *widths.last().expect("non-empty");
        let head = Linear::new(
            last,
            config.classes,
            uniform(&mut rng, last * config.classes, init_bound(last, config.classes)),
            Some(vec![0.0; config.classes]),
        )?;
        Model::new(config.clone(), layers, projections, head)
    }
}

pub fn init_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, a: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-a..=a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_shapes() {
        let r = preset("recognition").unwrap();
        assert_eq!(r.conv_channels(), vec![8, 16, 16, 16, 32, 32, 32]);
        assert_eq!(r.kernel_size(), Some(2));
        assert_eq!(r.classes, 2);
        let d = preset("detection").unwrap();
        assert_eq!(d.kernel_size(), Some(8));
        assert_eq!(d.conv_channels(), vec![16, 32, 32, 32, 128, 128, 128]);
        r.validate().unwrap();
        d.validate().unwrap();
        assert!(matches!(preset("segmentation"), Err(Error::Lookup(_))));
    }

    #[test]
    fn pooling_and_skip_placement() {
        let r = preset("recognition").unwrap();
        let pools: Vec<usize> = r
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, LayerConfig::MaxPool { .. }))
            .map(|(k, _)| k)
            .collect();
        // pooling directly after the fifth and seventh blocks
        assert_eq!(pools, vec![15, 22]);
        assert_eq!(r.skips.len(), 2);
        assert_eq!((r.skips[0].source, r.skips[0].sink, r.skips[0].projection), (9, 12, false));
        assert_eq!((r.skips[1].source, r.skips[1].sink, r.skips[1].projection), (12, 15, true));
    }

    #[test]
    fn validation_rejects_broken_ladders() {
        let mut c = preset("recognition").unwrap();
        c.layers[3] = LayerConfig::SplineConv { m_in: 9, m_out: 16, kernel_size: 2, degree: 1 };
        assert!(matches!(c.validate(), Err(Error::Shape(_))));
        let mut c = preset("recognition").unwrap();
        c.skips[1].projection = false;
        assert!(c.validate().is_err());
        let mut c = preset("recognition").unwrap();
        c.skips[0].sink = 17;
        assert!(c.validate().is_err());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let c = preset("recognition").unwrap();
        let a = Model::random_init(&c, 3).unwrap();
        assert_eq!(a, Model::random_init(&c, 3).unwrap());
        assert_ne!(a, Model::random_init(&c, 4).unwrap());
        for (cfg, p) in c.layers.iter().zip(a.layers()) {
            if let (LayerConfig::SplineConv { m_in, m_out, .. }, LayerParams::SplineConv(k)) = (cfg, p) {
                let bound = init_bound(*m_in, *m_out);
                assert!(k.weights().iter().all(|w| w.abs() <= bound));
            }
        }
        let head = a.head();
        assert!(head.weight.iter().all(|w| w.abs() <= init_bound(32, 2)));
        assert_eq!(head.bias.as_deref(), Some(&[0.0, 0.0][..]));
    }

    #[test]
    fn degree_override() {
        let c = preset("detection").unwrap().with_degree(3);
        assert!(c.layers.iter().all(|l| !matches!(l, LayerConfig::SplineConv { degree, .. } if *degree != 3)));
    }
}
