//! Values exchanged with the six model capabilities, and the boundary rules
//! that turn raw provider output into them.
//!
//! Every constructor here validates; a provider response that fails
//! validation is reported as a [`CapabilityError`] and never reaches the
//! pipeline.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CapabilityError {
    #[error("region mask is empty")]
    EmptyMask,
    #[error("mask is {mask_width}x{mask_height} but image is {width}x{height}")]
    MaskSize {
        width: u32,
        height: u32,
        mask_width: u32,
        mask_height: u32,
    },
    #[error("POS token is empty")]
    EmptyToken,
    #[error("cannot map model answer {0:?} to yes/no")]
    UnmappableAnswer(String),
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error("heatmap value at index {0} is not finite")]
    NonFiniteHeat(usize),
    #[error("heatmap value {value} at index {index} outside [0, 1]")]
    HeatOutOfRange { index: usize, value: f64 },
    #[error("heatmap declares {width}x{height} but carries {len} values")]
    HeatmapSize { width: u32, height: u32, len: usize },
}

/// Binary region mask over the full image.
#[derive(Clone, PartialEq, Eq)]
pub struct RegionMask {
    width: u32,
    height: u32,
    mask: Vec<bool>,
    area: usize,
}

impl RegionMask {
    pub fn new(width: u32, height: u32, mask: Vec<bool>) -> Result<Self, CapabilityError> {
        if mask.len() != width as usize * height as usize {
            return Err(CapabilityError::MaskSize {
                width,
                height,
                mask_width: width,
                mask_height: (mask.len() / width.max(1) as usize) as u32,
            });
        }
        let area = mask.iter().filter(|&&m| m).count();
        if area == 0 {
            return Err(CapabilityError::EmptyMask);
        }
        Ok(Self {
            width,
            height,
            mask,
            area,
        })
    }

    /// Mask that is set exactly at the given `(x, y)` pixels.
    pub fn from_pixels(
        width: u32,
        height: u32,
        pixels: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self, CapabilityError> {
        let mut mask = alloc::vec![false; width as usize * height as usize];
        for (x, y) in pixels {
            if x >= width || y >= height {
                return Err(CapabilityError::MaskSize {
                    width,
                    height,
                    mask_width: x + 1,
                    mask_height: y + 1,
                });
            }
            mask[y as usize * width as usize + x as usize] = true;
        }
        Self::new(width, height, mask)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn area(&self) -> usize {
        self.area
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height && self.mask[y as usize * self.width as usize + x as usize]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.mask
    }

    pub fn check_size(&self, width: u32, height: u32) -> Result<(), CapabilityError> {
        if self.width != width || self.height != height {
            return Err(CapabilityError::MaskSize {
                width,
                height,
                mask_width: self.width,
                mask_height: self.height,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for RegionMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegionMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area)
            .finish_non_exhaustive()
    }
}

/// A word with its Penn Treebank part-of-speech tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosTaggedToken {
    pub token: String,
    pub tag: String,
}

impl PosTaggedToken {
    pub fn new(token: impl Into<String>, tag: impl Into<String>) -> Result<Self, CapabilityError> {
        let token = token.into();
        if token.is_empty() {
            return Err(CapabilityError::EmptyToken);
        }
        Ok(Self {
            token,
            tag: tag.into(),
        })
    }

    /// NN, NNS, NNP and NNPS.
    pub fn is_noun(&self) -> bool {
        self.tag.starts_with("NN")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YesNoAnswer {
    pub answer: Answer,
    pub confidence: f64,
}

impl YesNoAnswer {
    pub fn new(answer: Answer, confidence: f64) -> Result<Self, CapabilityError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(CapabilityError::Confidence(confidence));
        }
        Ok(Self { answer, confidence })
    }

    /// Maps free-text model output onto yes/no.
    ///
    /// Only the first whitespace-separated token counts, with non-letters
    /// stripped and case folded. Confidence defaults to 1.0.
    pub fn from_model_output(text: &str, confidence: Option<f64>) -> Result<Self, CapabilityError> {
        let leading: String = text
            .split_whitespace()
            .next()
            .unwrap_or("")
            .chars()
            .filter(|c| c.is_alphabetic())
            .flat_map(char::to_lowercase)
            .collect();
        let answer = match leading.as_str() {
            "yes" => Answer::Yes,
            "no" => Answer::No,
            _ => return Err(CapabilityError::UnmappableAnswer(text.to_string())),
        };
        Self::new(answer, confidence.unwrap_or(1.0))
    }

    pub fn is_yes(&self) -> bool {
        self.answer == Answer::Yes
    }
}

/// Per-pixel text/image similarity in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self, CapabilityError> {
        if width == 0 || height == 0 || values.len() != width as usize * height as usize {
            return Err(CapabilityError::HeatmapSize {
                width,
                height,
                len: values.len(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(CapabilityError::NonFiniteHeat(index));
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(CapabilityError::HeatOutOfRange { index, value });
            }
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Brings a model-native similarity map to image resolution.
    ///
    /// The map is resampled bilinearly (pixel centres aligned, edges
    /// clamped) and then min-max normalized. A constant map becomes all
    /// zeros.
    pub fn from_model_output(
        native_width: u32,
        native_height: u32,
        values: &[f64],
        width: u32,
        height: u32,
    ) -> Result<Self, CapabilityError> {
        if native_width == 0 || native_height == 0 || values.len() != native_width as usize * native_height as usize {
            return Err(CapabilityError::HeatmapSize {
                width: native_width,
                height: native_height,
                len: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CapabilityError::NonFiniteHeat(i));
        }
        if width == 0 || height == 0 {
            return Err(CapabilityError::HeatmapSize { width, height, len: 0 });
        }
        let mut resized = resize_bilinear(native_width, native_height, values, width, height);
        normalize_min_max(&mut resized);
        Self::new(width, height, resized)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

fn resize_bilinear(sw: u32, sh: u32, src: &[f64], dw: u32, dh: u32) -> Vec<f64> {
    if sw == dw && sh == dh {
        return src.to_vec();
    }
    let sample_axis = |dst: u32, src_len: u32, dst_len: u32| -> (usize, usize, f64) {
        let scale = src_len as f64 / dst_len as f64;
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = libm::floor(pos) as usize;
        let hi = (lo + 1).min(src_len as usize - 1);
        (lo, hi, pos - lo as f64)
    };
    let at = |x: usize, y: usize| src[y * sw as usize + x];
    let mut out = Vec::with_capacity(dw as usize * dh as usize);
    for y in 0..dh {
        let (y0, y1, wy) = sample_axis(y, sh, dh);
        for x in 0..dw {
            let (x0, x1, wx) = sample_axis(x, sw, dw);
            let top = at(x0, y0) * (1.0 - wx) + at(x1, y0) * wx;
            let bottom = at(x0, y1) * (1.0 - wx) + at(x1, y1) * wx;
            out.push(top * (1.0 - wy) + bottom * wy);
        }
    }
    out
}

fn normalize_min_max(values: &mut [f64]) {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = max - min;
    for v in values.iter_mut() {
        *v = if range > 0.0 { (*v - min) / range } else { 0.0 };
    }
}
