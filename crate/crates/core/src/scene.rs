//! Scene data model.
//!
//! Pixel `(x, y)` is `(column, row)` with the origin at the top-left corner.
//! The 3D camera frame is `+x` right, `+y` down, `+z` forward.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("image must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: u32, height: u32 },
    #[error("pixel buffer holds {actual} bytes, expected {expected} for {width}x{height} RGB")]
    PixelBufferSize {
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },
    #[error("depth map is {depth_width}x{depth_height} but image is {width}x{height}")]
    DepthDimensions {
        width: u32,
        height: u32,
        depth_width: u32,
        depth_height: u32,
    },
    #[error("depth value {value} at ({x}, {y}) is negative or not finite")]
    InvalidDepth { x: u32, y: u32, value: f64 },
    #[error("focal lengths must be positive and finite, got fx={fx} fy={fy}")]
    FocalLength { fx: f64, fy: f64 },
    #[error("principal point must be finite, got cx={cx} cy={cy}")]
    PrincipalPoint { cx: f64, cy: f64 },
    #[error("box {0} is empty or inverted")]
    DegenerateBox(BoundingBox),
    #[error("box {bbox} does not fit in a {width}x{height} image")]
    BoxOutOfBounds {
        bbox: BoundingBox,
        width: u32,
        height: u32,
    },
}

/// An 8-bit RGB image, row-major, three bytes per pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct SceneImage {
    id: String,
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl SceneImage {
    pub fn new(
        id: impl Into<String>,
        width: u32,
        height: u32,
        pixels: Vec<u8>,
    ) -> Result<Self, SceneError> {
        if width == 0 || height == 0 {
            return Err(SceneError::EmptyImage { width, height });
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(SceneError::PixelBufferSize {
                width,
                height,
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            id: id.into(),
            width,
            height,
            pixels,
        })
    }

    /// A single-colour image, mostly useful for fixtures.
    pub fn filled(id: impl Into<String>, width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, SceneError> {
        let count = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(count * 3);
        for _ in 0..count {
            pixels.extend_from_slice(&rgb);
        }
        Self::new(id, width, height, pixels)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Raw row-major RGB bytes.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height
    }

    /// Pixel at column `x`, row `y`. Panics when out of bounds.
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        assert!(self.contains(x, y), "pixel ({x}, {y}) outside {}x{}", self.width, self.height);
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn full_box(&self) -> BoundingBox {
        BoundingBox {
            x0: 0,
            y0: 0,
            x1: self.width,
            y1: self.height,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Copies the pixels inside `bbox` into a new image.
    ///
    /// The patch id is `"{id}@{x0},{y0},{x1},{y1}"`.
    pub fn crop(&self, bbox: BoundingBox) -> Result<SceneImage, SceneError> {
        bbox.check_within(self.width, self.height)?;
        let row_bytes = bbox.width() as usize * 3;
        let mut pixels = Vec::with_capacity(row_bytes * bbox.height() as usize);
        for y in bbox.y0..bbox.y1 {
            let start = (y as usize * self.width as usize + bbox.x0 as usize) * 3;
            pixels.extend_from_slice(&self.pixels[start..start + row_bytes]);
        }
        Ok(SceneImage {
            id: alloc::format!("{}@{}", self.id, bbox),
            width: bbox.width(),
            height: bbox.height(),
            pixels,
        })
    }
}

impl fmt::Debug for SceneImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SceneImage")
            .field("id", &self.id)
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

/// Crops `bbox` out of `image`. See [`SceneImage::crop`].
pub fn crop(image: &SceneImage, bbox: BoundingBox) -> Result<SceneImage, SceneError> {
    image.crop(bbox)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, SceneError> {
        let intr = Self { fx, fy, cx, cy };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.fx.is_finite() && self.fy.is_finite() && self.fx > 0.0 && self.fy > 0.0) {
            return Err(SceneError::FocalLength {
                fx: self.fx,
                fy: self.fy,
            });
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(SceneError::PrincipalPoint {
                cx: self.cx,
                cy: self.cy,
            });
        }
        Ok(())
    }

    /// Projects a camera-frame point back onto the image plane.
    pub fn project(&self, point: Placement3D) -> (f64, f64) {
        (
            self.fx * point.x / point.z + self.cx,
            self.fy * point.y / point.z + self.cy,
        )
    }
}

/// RGB image plus a per-pixel metric depth map and pinhole intrinsics.
///
/// A depth of `0.0` marks a missing measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthScene {
    image: SceneImage,
    depth: Vec<f64>,
    intrinsics: CameraIntrinsics,
}

impl DepthScene {
    /// `depth` is row-major, `depth_width * depth_height` meters.
    pub fn new(
        image: SceneImage,
        depth: Vec<f64>,
        depth_width: u32,
        depth_height: u32,
        intrinsics: CameraIntrinsics,
    ) -> Result<Self, SceneError> {
        if depth_width != image.width()
            || depth_height != image.height()
            || depth.len() != depth_width as usize * depth_height as usize
        {
            return Err(SceneError::DepthDimensions {
                width: image.width(),
                height: image.height(),
                depth_width,
                depth_height,
            });
        }
        if let Some(i) = depth.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            let w = image.width() as usize;
            return Err(SceneError::InvalidDepth {
                x: (i % w) as u32,
                y: (i / w) as u32,
                value: depth[i],
            });
        }
        intrinsics.validate()?;
        Ok(Self {
            image,
            depth,
            intrinsics,
        })
    }

    /// Scene with the same depth everywhere.
    pub fn uniform(image: SceneImage, depth_m: f64, intrinsics: CameraIntrinsics) -> Result<Self, SceneError> {
        let (w, h) = (image.width(), image.height());
        Self::new(image, alloc::vec![depth_m; w as usize * h as usize], w, h, intrinsics)
    }

    pub fn image(&self) -> &SceneImage {
        &self.image
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    /// Depth in meters at column `x`, row `y`; `None` outside the image.
    pub fn depth_at(&self, x: u32, y: u32) -> Option<f64> {
        self.image
            .contains(x, y)
            .then(|| self.depth[y as usize * self.image.width() as usize + x as usize])
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }
}

/// Axis-aligned pixel box with exclusive upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BoundingBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self, SceneError> {
        let bbox = Self { x0, y0, x1, y1 };
        if x0 >= x1 || y0 >= y1 {
            return Err(SceneError::DegenerateBox(bbox));
        }
        Ok(bbox)
    }

    pub fn width(&self) -> u32 {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> u32 {
        self.y1.saturating_sub(self.y0)
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn check_within(&self, width: u32, height: u32) -> Result<(), SceneError> {
        if self.x0 >= self.x1 || self.y0 >= self.y1 {
            return Err(SceneError::DegenerateBox(*self));
        }
        if self.x1 > width || self.y1 > height {
            return Err(SceneError::BoxOutOfBounds {
                bbox: *self,
                width,
                height,
            });
        }
        Ok(())
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x0, self.y0, self.x1, self.y1)
    }
}

/// The chosen placement pixel and the noun it was grounded on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement2D {
    pub x: u32,
    pub y: u32,
    pub noun: String,
    pub heat: f64,
}

/// Placement point in the camera frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}
