//! Scene files: RGB images, RGB-D scene bundles and OBJ meshes.
//!
//! A scene bundle is a directory holding `rgb.png` (8-bit RGB),
//! `depth.png` (16-bit grayscale, millimeters) and `intrinsics.json`
//! (`fx`, `fy`, `cx`, `cy` in pixels).

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat, ImageReader};
use octoplace_core::geometry::{GeometryError, TriangleMesh, Vec3};
use octoplace_core::scene::{CameraIntrinsics, DepthScene, SceneError, SceneImage};
use thiserror::Error;

pub const RGB_FILE: &str = "rgb.png";
pub const DEPTH_FILE: &str = "depth.png";
pub const INTRINSICS_FILE: &str = "intrinsics.json";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl BundleError {
    fn format(path: &Path, message: impl ToString) -> Self {
        BundleError::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, BundleError::Io { .. })
    }
}

fn read(path: &Path) -> Result<Vec<u8>, BundleError> {
    fs::read(path).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), BundleError> {
    fs::write(path, bytes).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn decode(bytes: &[u8]) -> Result<DynamicImage, image::ImageError> {
    ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png).decode()
}

/// Decodes a PNG into an RGB scene image, dropping any alpha channel.
pub fn decode_png(bytes: &[u8], id: &str) -> Result<SceneImage, image::ImageError> {
    let rgb = decode(bytes)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(SceneImage::new(id, w, h, rgb.into_raw()).expect("decoded PNG has consistent dimensions"))
}

pub fn encode_png(image: &SceneImage) -> Vec<u8> {
    let buf = image::RgbImage::from_raw(image.width(), image.height(), image.pixels().to_vec())
        .expect("scene image buffer matches its dimensions");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    out.into_inner()
}

/// Loads an image file; its id is the file stem.
pub fn load_scene_image(path: &Path) -> Result<SceneImage, BundleError> {
    let bytes = read(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_png(&bytes, &id).map_err(|e| BundleError::format(path, e))
}

pub fn save_scene_image(path: &Path, image: &SceneImage) -> Result<(), BundleError> {
    write(path, &encode_png(image))
}

pub fn load_intrinsics(path: &Path) -> Result<CameraIntrinsics, BundleError> {
    let bytes = read(path)?;
    let intr: CameraIntrinsics =
        serde_json::from_slice(&bytes).map_err(|e| BundleError::format(path, e))?;
    intr.validate().map_err(|e| BundleError::format(path, e))?;
    Ok(intr)
}

/// Loads a scene bundle directory. Depth millimeters become meters.
///
/// The scene image id is the directory name.
pub fn load_depth_scene(dir: &Path) -> Result<DepthScene, BundleError> {
    let id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let rgb_path = dir.join(RGB_FILE);
    let image = decode_png(&read(&rgb_path)?, &id).map_err(|e| BundleError::format(&rgb_path, e))?;

    let depth_path = dir.join(DEPTH_FILE);
    let depth_img = decode(&read(&depth_path)?).map_err(|e| BundleError::format(&depth_path, e))?;
    let DynamicImage::ImageLuma16(depth_mm) = depth_img else {
        return Err(BundleError::format(&depth_path, "depth must be 16-bit grayscale"));
    };
    let (dw, dh) = depth_mm.dimensions();
    let depth = depth_mm.into_raw().into_iter().map(|mm| mm as f64 / 1000.0).collect();

    let intrinsics = load_intrinsics(&dir.join(INTRINSICS_FILE))?;
    DepthScene::new(image, depth, dw, dh, intrinsics).map_err(|e| match e {
        SceneError::DepthDimensions { .. } => BundleError::format(&depth_path, e),
        other => BundleError::format(dir, other),
    })
}

/// Writes `scene` as a bundle. Depth is rounded to whole millimeters.
pub fn save_depth_scene(dir: &Path, scene: &DepthScene) -> Result<(), BundleError> {
    fs::create_dir_all(dir).map_err(|source| BundleError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    save_scene_image(&dir.join(RGB_FILE), scene.image())?;

    let depth_path = dir.join(DEPTH_FILE);
    let mut mm = Vec::with_capacity(scene.depth().len());
    for &d in scene.depth() {
        let v = (d * 1000.0).round();
        if v > u16::MAX as f64 {
            return Err(BundleError::format(&depth_path, format!("depth {d} m exceeds 16-bit millimeters")));
        }
        mm.push(v as u16);
    }
    let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(scene.width(), scene.height(), mm)
        .expect("depth buffer matches scene dimensions");
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| BundleError::format(&depth_path, e))?;
    write(&depth_path, &out.into_inner())?;

    let intr = serde_json::to_vec_pretty(scene.intrinsics()).expect("intrinsics serialize");
    write(&dir.join(INTRINSICS_FILE), &intr)
}

/// Parses the `v` / `f` subset of Wavefront OBJ.
///
/// Face indices are 1-based; `a/b/c` references use the vertex part and
/// polygons are fan-triangulated. Other directives are ignored.
pub fn parse_obj(text: &str) -> Result<TriangleMesh, String> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let coords = parts
                    .take(3)
                    .map(|p| p.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| format!("line {lineno}: {e}"))?;
                let [x, y, z] = coords[..] else {
                    return Err(format!("line {lineno}: vertex needs three coordinates"));
                };
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let idx = parts
                    .map(|p| {
                        let head = p.split('/').next().unwrap_or(p);
                        match head.parse::<usize>() {
                            Ok(i) if i >= 1 => Ok(i - 1),
                            _ => Err(format!("line {lineno}: bad face index {p:?}")),
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if idx.len() < 3 {
                    return Err(format!("line {lineno}: face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces).map_err(|e: GeometryError| e.to_string())
}

pub fn load_obj(path: &Path) -> Result<TriangleMesh, BundleError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| BundleError::format(path, e))?;
    parse_obj(&text).map_err(|e| BundleError::format(path, e))
}
