//! JSON wire format shared by the HTTP adapter and fixture files.
//!
//! | capability      | response body                                    |
//! |-----------------|--------------------------------------------------|
//! | `segment`       | `{"masks": ["<rle>", ...]}`                      |
//! | `caption`       | `{"text": "..."}`                                |
//! | `tag_pos`       | `{"tokens": [["token", "TAG"], ...]}`            |
//! | `answer_yes_no` | `{"answer": "...", "confidence": 0.9}`           |
//! | `complete`      | `{"text": "..."}`                                |
//! | `ground`        | `{"heatmap": {"w": W, "h": H, "values": [...]}}` |
//!
//! Masks are run-length encoded as `"{w}x{h}:{r0},{r1},..."`: row-major
//! runs that alternate unset/set, starting with unset (so a mask whose first
//! pixel is set starts with a `0` run). The runs sum to `w * h`.

use octoplace_core::capability::{Heatmap, PosTaggedToken, RegionMask, YesNoAnswer};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Deserialize)]
struct MasksBody {
    masks: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct TextBody {
    text: String,
}

#[derive(Debug, Deserialize)]
struct TokensBody {
    tokens: Vec<(String, String)>,
}

#[derive(Debug, Deserialize)]
struct AnswerBody {
    answer: String,
    #[serde(default)]
    confidence: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WireHeatmap {
    pub w: u32,
    pub h: u32,
    pub values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct HeatmapBody {
    heatmap: WireHeatmap,
}

/// Request body for `POST /v1/<capability>`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct WireRequest {
    /// Base64-encoded PNG.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub image: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<String>,
}

fn body<T: for<'de> Deserialize<'de>>(value: &Value) -> Result<T, String> {
    T::deserialize(value).map_err(|e| e.to_string())
}

pub fn encode_rle(mask: &RegionMask) -> String {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0usize;
    for &bit in mask.as_slice() {
        if bit == current {
            len += 1;
        } else {
            runs.push(len.to_string());
            current = bit;
            len = 1;
        }
    }
    runs.push(len.to_string());
    format!("{}x{}:{}", mask.width(), mask.height(), runs.join(","))
}

pub fn decode_rle(text: &str) -> Result<RegionMask, String> {
    let (dims, runs) = text.split_once(':').ok_or("RLE mask lacks ':'")?;
    let (w, h) = dims.split_once('x').ok_or("RLE dimensions must be WxH")?;
    let w: u32 = w.parse().map_err(|_| format!("bad RLE width {w:?}"))?;
    let h: u32 = h.parse().map_err(|_| format!("bad RLE height {h:?}"))?;
    let total = w as usize * h as usize;
    let mut mask = Vec::with_capacity(total);
    let mut bit = false;
    for run in runs.split(',').filter(|r| !r.is_empty()) {
        let n: usize = run.parse().map_err(|_| format!("bad RLE run {run:?}"))?;
        if mask.len() + n > total {
            return Err(format!("RLE runs exceed {w}x{h}"));
        }
        mask.extend(std::iter::repeat_n(bit, n));
        bit = !bit;
    }
    if mask.len() != total {
        return Err(format!("RLE runs cover {} of {total} pixels", mask.len()));
    }
    RegionMask::new(w, h, mask).map_err(|e| e.to_string())
}

pub fn parse_segment(value: &Value, width: u32, height: u32) -> Result<Vec<RegionMask>, String> {
    let MasksBody { masks } = body(value)?;
    masks
        .iter()
        .map(|m| {
            let mask = decode_rle(m)?;
            mask.check_size(width, height).map_err(|e| e.to_string())?;
            Ok(mask)
        })
        .collect()
}

pub fn parse_text(value: &Value) -> Result<String, String> {
    body::<TextBody>(value).map(|b| b.text)
}

pub fn parse_tokens(value: &Value) -> Result<Vec<PosTaggedToken>, String> {
    let TokensBody { tokens } = body(value)?;
    tokens
        .into_iter()
        .map(|(t, g)| PosTaggedToken::new(t, g).map_err(|e| e.to_string()))
        .collect()
}

pub fn parse_answer(value: &Value) -> Result<YesNoAnswer, String> {
    let AnswerBody { answer, confidence } = body(value)?;
    YesNoAnswer::from_model_output(&answer, confidence).map_err(|e| e.to_string())
}

pub fn parse_heatmap(value: &Value, width: u32, height: u32) -> Result<Heatmap, String> {
    let HeatmapBody { heatmap } = body(value)?;
    Heatmap::from_model_output(heatmap.w, heatmap.h, &heatmap.values, width, height)
        .map_err(|e| e.to_string())
}

pub fn segment_response(masks: &[RegionMask]) -> Value {
    json!({ "masks": masks.iter().map(encode_rle).collect::<Vec<_>>() })
}

pub fn text_response(text: &str) -> Value {
    json!({ "text": text })
}

pub fn tokens_response(tokens: &[(&str, &str)]) -> Value {
    json!({ "tokens": tokens })
}

pub fn answer_response(answer: &str, confidence: Option<f64>) -> Value {
    match confidence {
        Some(c) => json!({ "answer": answer, "confidence": c }),
        None => json!({ "answer": answer }),
    }
}

pub fn heatmap_response(w: u32, h: u32, values: &[f64]) -> Value {
    json!({ "heatmap": WireHeatmap { w, h, values: values.to_vec() } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rle_examples() {
        let m = RegionMask::from_pixels(3, 1, [(1, 0)]).unwrap();
        assert_eq!(encode_rle(&m), "3x1:1,1,1");
        let first = RegionMask::from_pixels(3, 1, [(0, 0), (1, 0)]).unwrap();
        assert_eq!(encode_rle(&first), "3x1:0,2,1");
        assert_eq!(decode_rle("3x1:0,2,1").unwrap(), first);
        assert!(decode_rle("3x1:1,1").is_err());
        assert!(decode_rle("3x1:3").is_err()); // empty mask
        assert!(decode_rle("3x1:1,5").is_err());
        assert!(decode_rle("garbage").is_err());
    }

    #[test]
    fn segment_rejects_wrong_size() {
        let m = RegionMask::from_pixels(3, 1, [(1, 0)]).unwrap();
        let v = segment_response(&[m]);
        assert_eq!(parse_segment(&v, 3, 1).unwrap().len(), 1);
        assert!(parse_segment(&v, 4, 1).is_err());
        assert!(parse_segment(&json!({ "masks": [] }), 4, 1).unwrap().is_empty());
    }

    #[test]
    fn heatmap_with_null_is_rejected() {
        let v = json!({ "heatmap": { "w": 2, "h": 1, "values": [0.1, null] } });
        assert!(parse_heatmap(&v, 2, 1).is_err());
    }

    #[test]
    fn answers() {
        assert!(parse_answer(&answer_response("Yes.", None)).unwrap().is_yes());
        assert!(parse_answer(&answer_response("maybe", Some(0.3))).is_err());
        assert!(parse_answer(&json!({ "text": "yes" })).is_err());
    }

    proptest! {
        #[test]
        fn rle_round_trip(w in 1u32..9, h in 1u32..9, bits in prop::collection::vec(any::<bool>(), 81)) {
            let mut bits = bits[..(w * h) as usize].to_vec();
            bits[0] = true;
            let m = RegionMask::new(w, h, bits).unwrap();
            prop_assert_eq!(decode_rle(&encode_rle(&m)).unwrap(), m);
        }
    }
}
