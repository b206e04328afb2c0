//! Small demo scenes with canned model responses.
//!
//! Each scene pairs a synthetic image with a [`FixtureStore`] holding every
//! response the pipeline will ask for, so a full run needs no network.
//! [`write_demo`] lays the scenes out on disk together with a pipeline
//! config that routes all capabilities to the fixture file.

use std::path::Path;

use octoplace_core::capability::RegionMask;
use octoplace_core::scene::{BoundingBox, CameraIntrinsics, DepthScene, SceneImage};
use serde_json::json;

use crate::backends::wire::{
    answer_response, heatmap_response, segment_response, text_response, tokens_response,
};
use crate::backends::{Capability, FixtureStore, Request};
use crate::bundle::{save_depth_scene, save_scene_image, BundleError};
use crate::pipeline::PipelineOptions;

pub const FIXTURE_FILE: &str = "fixtures.json";
pub const CONFIG_FILE: &str = "config.json";
/// Regions in the demo scenes are tiny, so the area threshold is lowered.
pub const DEMO_MIN_AREA: usize = 4;

const SELECTION: &str =
    "Give a one word response to fill in the blank using only one of these options: ";

pub struct GoldenScene {
    pub image: SceneImage,
    pub object: &'static str,
    pub fixtures: FixtureStore,
    /// Metric depth for scenes that also exercise 3D placement.
    pub depth: Option<DepthScene>,
}

impl GoldenScene {
    pub fn options(&self) -> PipelineOptions {
        PipelineOptions {
            min_area: DEMO_MIN_AREA,
            ..PipelineOptions::default()
        }
    }
}

fn gradient(id: &str, width: u32, height: u32, seed: u8) -> SceneImage {
    let mut pixels = Vec::with_capacity((width * height * 3) as usize);
    for y in 0..height {
        for x in 0..width {
            pixels.push((x as u8).wrapping_mul(29).wrapping_add(seed));
            pixels.push((y as u8).wrapping_mul(41));
            pixels.push(((x + y) as u8).wrapping_mul(13) ^ seed);
        }
    }
    SceneImage::new(id, width, height, pixels).expect("non-empty demo image")
}

fn rect(width: u32, height: u32, bbox: (u32, u32, u32, u32)) -> RegionMask {
    let (x0, y0, x1, y1) = bbox;
    let pixels = (y0..y1).flat_map(|y| (x0..x1).map(move |x| (x, y)));
    RegionMask::from_pixels(width, height, pixels).expect("non-empty demo mask")
}

fn patch(image: &SceneImage, x0: u32, y0: u32, x1: u32, y1: u32) -> SceneImage {
    image
        .crop(BoundingBox::new(x0, y0, x1, y1).expect("valid demo box"))
        .expect("demo box inside image")
}

fn ask(store: &mut FixtureStore, image: &SceneImage, noun: &str, answer: &str, confidence: f64) {
    let question = format!("Is there a {noun} in the image?");
    store.insert(
        Capability::AnswerYesNo,
        Request::image_text(image, &question),
        answer_response(answer, Some(confidence)),
    );
}

fn tags(store: &mut FixtureStore, caption: &str, tokens: &[(&str, &str)]) {
    store.insert(Capability::TagPos, Request::text(caption), tokens_response(tokens));
}

fn selection(options: &str, object: &str) -> String {
    format!("{SELECTION}{{{options}}}. The {object} was located on the ____.")
}

/// Two kept regions, one dropped for its size; the selection names a
/// region noun.
pub fn kitchen() -> GoldenScene {
    let image = gradient("g1-kitchen", 8, 6, 7);
    let mut store = FixtureStore::new();
    let plate = RegionMask::from_pixels(8, 6, [(1, 1), (2, 1), (3, 1), (1, 2), (2, 2)]).unwrap();
    let crumbs = RegionMask::from_pixels(8, 6, [(0, 5), (1, 5)]).unwrap();
    let rug = rect(8, 6, (4, 3, 8, 6));
    store.insert(
        Capability::Segment,
        Request::image(&image),
        segment_response(&[plate, crumbs, rug]),
    );
    store.insert(
        Capability::Caption,
        Request::image(&patch(&image, 1, 1, 4, 3)),
        text_response("a plate on a table"),
    );
    store.insert(
        Capability::Caption,
        Request::image(&patch(&image, 4, 3, 8, 6)),
        text_response("a cat sitting on a rug"),
    );
    tags(
        &mut store,
        "a plate on a table",
        &[("a", "DT"), ("plate", "NN"), ("on", "IN"), ("a", "DT"), ("table", "NN")],
    );
    tags(
        &mut store,
        "a cat sitting on a rug",
        &[("a", "DT"), ("cat", "NN"), ("sitting", "VBG"), ("on", "IN"), ("a", "DT"), ("rug", "NN")],
    );
    ask(&mut store, &image, "plate", "yes", 0.9);
    ask(&mut store, &image, "table", "Yes", 0.8);
    ask(&mut store, &image, "cat", "no", 0.7);
    ask(&mut store, &image, "rug", "no", 0.6);
    ask(&mut store, &image, "floor", "yes", 0.95);
    store.insert(
        Capability::Complete,
        Request::text(&selection("plate, table, floor", "cupcake")),
        text_response("Plate"),
    );
    let mut heat = vec![0.1; 48];
    heat[8 + 2] = 0.8;
    heat[8 + 3] = 0.5;
    store.insert(
        Capability::Ground,
        Request::image_text(&image, "plate"),
        heatmap_response(8, 6, &heat),
    );
    let intrinsics = CameraIntrinsics::new(4.0, 4.0, 4.0, 3.0).unwrap();
    let depth = DepthScene::uniform(image.clone(), 2.0, intrinsics).unwrap();
    GoldenScene {
        image,
        object: "cupcake",
        fixtures: store,
        depth: Some(depth),
    }
}

/// The only region noun is rejected, so floor is the sole option; the
/// grounding model answers at a lower resolution.
pub fn shelf() -> GoldenScene {
    let image = gradient("g2-shelf", 4, 4, 91);
    let mut store = FixtureStore::new();
    store.insert(
        Capability::Segment,
        Request::image(&image),
        segment_response(&[rect(4, 4, (0, 0, 4, 2))]),
    );
    store.insert(
        Capability::Caption,
        Request::image(&patch(&image, 0, 0, 4, 2)),
        text_response("a blue vase"),
    );
    tags(&mut store, "a blue vase", &[("a", "DT"), ("blue", "JJ"), ("vase", "NN")]);
    ask(&mut store, &image, "vase", "no", 0.85);
    ask(&mut store, &image, "floor", "yes", 0.9);
    store.insert(
        Capability::Complete,
        Request::text(&selection("floor", "lamp")),
        text_response("floor"),
    );
    store.insert(
        Capability::Ground,
        Request::image_text(&image, "floor"),
        heatmap_response(2, 2, &[0.1, 0.2, 0.3, 0.9]),
    );
    GoldenScene {
        image,
        object: "lamp",
        fixtures: store,
        depth: None,
    }
}

/// No regions at all; the completion model never names an option.
pub fn empty_room() -> GoldenScene {
    let image = gradient("g3-empty", 5, 5, 200);
    let mut store = FixtureStore::new();
    store.insert(Capability::Segment, Request::image(&image), json!({ "masks": [] }));
    ask(&mut store, &image, "floor", "yes", 0.99);
    store.insert(
        Capability::Complete,
        Request::text(&selection("floor", "stool")),
        text_response("I'm not sure."),
    );
    store.insert(
        Capability::Ground,
        Request::image_text(&image, "floor"),
        heatmap_response(5, 5, &[0.4; 25]),
    );
    GoldenScene {
        image,
        object: "stool",
        fixtures: store,
        depth: None,
    }
}

/// A noun shared by two captions plus a plural variant; the heatmap peak
/// is tied.
pub fn dining() -> GoldenScene {
    let image = gradient("g4-dining", 6, 4, 33);
    let mut store = FixtureStore::new();
    store.insert(
        Capability::Segment,
        Request::image(&image),
        segment_response(&[rect(6, 4, (0, 0, 3, 2)), rect(6, 4, (3, 2, 6, 4))]),
    );
    store.insert(
        Capability::Caption,
        Request::image(&patch(&image, 0, 0, 3, 2)),
        text_response("a cup on a table"),
    );
    store.insert(
        Capability::Caption,
        Request::image(&patch(&image, 3, 2, 6, 4)),
        text_response("two cups and a table"),
    );
    tags(
        &mut store,
        "a cup on a table",
        &[("a", "DT"), ("cup", "NN"), ("on", "IN"), ("a", "DT"), ("table", "NN")],
    );
    tags(
        &mut store,
        "two cups and a table",
        &[("two", "CD"), ("cups", "NNS"), ("and", "CC"), ("a", "DT"), ("table", "NN")],
    );
    ask(&mut store, &image, "cup", "yes", 0.7);
    ask(&mut store, &image, "table", "yes", 0.9);
    ask(&mut store, &image, "cups", "no", 0.6);
    ask(&mut store, &image, "floor", "yes", 0.8);
    store.insert(
        Capability::Complete,
        Request::text(&selection("cup, table, floor", "cake")),
        text_response("The table."),
    );
    let mut heat = vec![0.0; 24];
    heat[3] = 1.0;
    heat[2 * 6 + 5] = 1.0;
    store.insert(
        Capability::Ground,
        Request::image_text(&image, "table"),
        heatmap_response(6, 4, &heat),
    );
    GoldenScene {
        image,
        object: "cake",
        fixtures: store,
        depth: None,
    }
}

pub fn golden_scenes() -> Vec<GoldenScene> {
    vec![kitchen(), shelf(), empty_room(), dining()]
}

/// Writes `<id>.png` per scene, a scene bundle directory for scenes with
/// depth, the merged fixture file and a config pointing at it.
pub fn write_demo(dir: &Path) -> Result<(), BundleError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BundleError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut store = FixtureStore::new();
    for scene in golden_scenes() {
        save_scene_image(&dir.join(format!("{}.png", scene.image.id())), &scene.image)?;
        if let Some(depth) = &scene.depth {
            save_depth_scene(&dir.join(scene.image.id()), depth)?;
        }
        store.merge(scene.fixtures);
    }
    let fixtures = dir.join(FIXTURE_FILE);
    store.save(&fixtures).map_err(io(&fixtures))?;
    let config = json!({
        "backends": { "default": format!("fixture:{FIXTURE_FILE}") },
        "min_area": DEMO_MIN_AREA,
    });
    let config_path = dir.join(CONFIG_FILE);
    let text = serde_json::to_string_pretty(&config).expect("plain JSON");
    std::fs::write(&config_path, text).map_err(io(&config_path))
}
