//! CNN layer tables and their per-layer resource requirements.
//!
//! Only convolutional and fully-connected layers are modelled; pooling and
//! activations are folded into the preceding layer. Weights are stored with
//! `bits_per_weight` bits (32 by default) and intermediate activations are
//! 32-bit values, so a layer's output payload is its element count times 4.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default storage width of one weight.
pub const DEFAULT_BITS_PER_WEIGHT: u32 = 32;
/// Bytes per transmitted activation element.
pub const ACTIVATION_BYTES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Conv {
        /// Spatial filter side `s`.
        filter_size: u64,
        /// Spatial side `z` of the output feature map.
        output_spatial: u64,
    },
    FullyConnected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    #[serde(default)]
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
    /// Input channels (conv) or input neurons (fully-connected).
    pub in_channels: u64,
    /// Output channels (conv) or neurons (fully-connected).
    pub out_channels: u64,
    #[serde(default = "default_bits")]
    pub bits_per_weight: u32,
}

fn default_bits() -> u32 {
    DEFAULT_BITS_PER_WEIGHT
}

impl LayerSpec {
    pub fn conv(name: &str, in_channels: u64, filter_size: u64, out_channels: u64, output_spatial: u64) -> Self {
        LayerSpec {
            name: name.to_string(),
            kind: LayerKind::Conv {
                filter_size,
                output_spatial,
            },
            in_channels,
            out_channels,
            bits_per_weight: DEFAULT_BITS_PER_WEIGHT,
        }
    }

    pub fn fully_connected(name: &str, in_neurons: u64, out_neurons: u64) -> Self {
        LayerSpec {
            name: name.to_string(),
            kind: LayerKind::FullyConnected,
            in_channels: in_neurons,
            out_channels: out_neurons,
            bits_per_weight: DEFAULT_BITS_PER_WEIGHT,
        }
    }

    pub fn is_conv(&self) -> bool {
        matches!(self.kind, LayerKind::Conv { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.bits_per_weight == 0 {
            return Err(Error::config(format!("layer '{}': counts must be strictly positive", self.name)));
        }
        if let LayerKind::Conv {
            filter_size,
            output_spatial,
        } = self.kind
        {
            if filter_size == 0 || output_spatial == 0 {
                return Err(Error::config(format!(
                    "layer '{}': conv filter and output sizes must be >= 1",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Number of weights, biases excluded.
    pub fn weight_count(&self) -> u64 {
        match self.kind {
            LayerKind::Conv { filter_size, .. } => self.in_channels * filter_size * filter_size * self.out_channels,
            LayerKind::FullyConnected => self.in_channels * self.out_channels,
        }
    }

    /// Multiplications needed by the layer, whatever its kind.
    pub fn compute_load(&self) -> u64 {
        match self.kind {
            LayerKind::Conv { .. } => conv_compute_load(self).expect("kind checked"),
            LayerKind::FullyConnected => fc_compute_load(self).expect("kind checked"),
        }
    }
}

/// `n_in · s² · n_out · z²` multiplications of a convolutional layer.
pub fn conv_compute_load(layer: &LayerSpec) -> Result<u64> {
    match layer.kind {
        LayerKind::Conv {
            filter_size,
            output_spatial,
        } => Ok(layer.in_channels * filter_size * filter_size * layer.out_channels * output_spatial * output_spatial),
        LayerKind::FullyConnected => Err(Error::contract(format!(
            "conv_compute_load called on fully-connected layer '{}'",
            layer.name
        ))),
    }
}

/// `n_in · n_out` multiplications of a fully-connected layer.
pub fn fc_compute_load(layer: &LayerSpec) -> Result<u64> {
    match layer.kind {
        LayerKind::FullyConnected => Ok(layer.in_channels * layer.out_channels),
        LayerKind::Conv { .. } => Err(Error::contract(format!(
            "fc_compute_load called on convolutional layer '{}'",
            layer.name
        ))),
    }
}

/// Weight storage in bytes.
pub fn layer_memory(layer: &LayerSpec) -> u64 {
    layer.weight_count() * u64::from(layer.bits_per_weight) / 8
}

/// Bytes of the output feature map handed to the next layer.
pub fn intermediate_size(layer: &LayerSpec) -> u64 {
    match layer.kind {
        LayerKind::Conv { output_spatial, .. } => output_spatial * output_spatial * layer.out_channels * ACTIVATION_BYTES,
        LayerKind::FullyConnected => layer.out_channels * ACTIVATION_BYTES,
    }
}

/// Derived requirements of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LayerCost {
    /// Multiplications `c_j`.
    pub compute: u64,
    /// Weight bytes `m_j`.
    pub memory: u64,
    /// Output payload bytes `K_j`.
    pub output_bytes: u64,
}

impl LayerCost {
    pub fn of(layer: &LayerSpec) -> Self {
        LayerCost {
            compute: layer.compute_load(),
            memory: layer_memory(layer),
            output_bytes: intermediate_size(layer),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputShape {
    pub height: u64,
    pub width: u64,
    #[serde(default = "default_input_channels")]
    pub channels: u64,
}

fn default_input_channels() -> u64 {
    3
}

impl InputShape {
    pub fn rgb(height: u64, width: u64) -> Self {
        InputShape {
            height,
            width,
            channels: 3,
        }
    }

    /// Raw 8-bit capture size.
    pub fn bytes(&self) -> u64 {
        self.height * self.width * self.channels
    }
}

/// On-disk form of a network table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub name: String,
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
}

/// A validated network table with cached per-layer costs.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    name: String,
    input: InputShape,
    layers: Vec<LayerSpec>,
    costs: Vec<LayerCost>,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>, input: InputShape, layers: Vec<LayerSpec>) -> Result<Self> {
        let name = name.into();
        if layers.is_empty() {
            return Err(Error::config(format!("network '{name}' has no layers")));
        }
        if input.bytes() == 0 {
            return Err(Error::config(format!("network '{name}' has an empty input")));
        }
        for layer in &layers {
            layer.validate()?;
        }
        let costs = layers.iter().map(LayerCost::of).collect();
        Ok(NetworkSpec {
            name,
            input,
            layers,
            costs,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::config(format!("network file: {e}")))?;
        NetworkSpec::new(file.name, file.input, file.layers)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            name: self.name.clone(),
            input: self.input.clone(),
            layers: self.layers.clone(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn costs(&self) -> &[LayerCost] {
        &self.costs
    }

    pub fn cost(&self, layer: usize) -> &LayerCost {
        &self.costs[layer]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// `K_s`: bytes of the captured image.
    pub fn input_bytes(&self) -> u64 {
        self.input.bytes()
    }

    pub fn input_shape(&self) -> &InputShape {
        &self.input
    }

    /// Neurons of the final layer.
    pub fn class_count(&self) -> u64 {
        self.layers.last().map(|l| l.out_channels).unwrap_or(0)
    }

    pub fn total_memory(&self) -> u64 {
        self.costs.iter().map(|c| c.memory).sum()
    }

    pub fn total_compute(&self) -> u64 {
        self.costs.iter().map(|c| c.compute).sum()
    }
}

/// Names accepted by [`build_network`].
pub const BUILTIN_NETWORKS: [&str; 3] = ["LeNet", "AlexNet", "VGG16"];

/// Builds one of the reference networks by (case-insensitive) name.
pub fn build_network(name: &str) -> Result<NetworkSpec> {
    match name.to_ascii_lowercase().as_str() {
        "lenet" => lenet(),
        "alexnet" => alexnet(),
        "vgg16" => vgg16(),
        _ => Err(Error::config(format!(
            "unknown network '{name}' (expected one of {BUILTIN_NETWORKS:?})"
        ))),
    }
}

fn lenet() -> Result<NetworkSpec> {
    NetworkSpec::new(
        "LeNet",
        InputShape::rgb(32, 32),
        vec![
            LayerSpec::conv("conv1", 3, 5, 6, 28),
            LayerSpec::conv("conv2", 6, 5, 16, 10),
            LayerSpec::fully_connected("fc1", 16 * 5 * 5, 120),
            LayerSpec::fully_connected("fc2", 120, 84),
            LayerSpec::fully_connected("fc3", 84, 10),
        ],
    )
}

fn alexnet() -> Result<NetworkSpec> {
    NetworkSpec::new(
        "AlexNet",
        InputShape::rgb(227, 227),
        vec![
            LayerSpec::conv("conv1", 3, 11, 96, 55),
            LayerSpec::conv("conv2", 96, 5, 256, 27),
            LayerSpec::conv("conv3", 256, 3, 384, 13),
            LayerSpec::conv("conv4", 384, 3, 384, 13),
            LayerSpec::conv("conv5", 384, 3, 256, 13),
            LayerSpec::fully_connected("fc6", 256 * 6 * 6, 4096),
            LayerSpec::fully_connected("fc7", 4096, 4096),
            LayerSpec::fully_connected("fc8", 4096, 1000),
        ],
    )
}

fn vgg16() -> Result<NetworkSpec> {
    // (in, out, output side) for the 3x3 same-padded convolutions.
    let convs: [(u64, u64, u64); 13] = [
        (3, 64, 224),
        (64, 64, 224),
        (64, 128, 112),
        (128, 128, 112),
        (128, 256, 56),
        (256, 256, 56),
        (256, 256, 56),
        (256, 512, 28),
        (512, 512, 28),
        (512, 512, 28),
        (512, 512, 14),
        (512, 512, 14),
        (512, 512, 14),
    ];
    let mut layers: Vec<LayerSpec> = convs
        .iter()
        .enumerate()
        .map(|(i, &(cin, cout, z))| LayerSpec::conv(&format!("conv{}", i + 1), cin, 3, cout, z))
        .collect();
    layers.push(LayerSpec::fully_connected("fc14", 512 * 7 * 7, 4096));
    layers.push(LayerSpec::fully_connected("fc15", 4096, 4096));
    layers.push(LayerSpec::fully_connected("fc16", 4096, 1000));
    NetworkSpec::new("VGG16", InputShape::rgb(224, 224), layers)
}
