use async_trait::async_trait;
use mentalgen_core::signal::CommandLabel;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::Generator;
use crate::store::ArtifactStore;
use crate::types::{FailureKind, GenerationRequest, GenerationResult};

const WIDTH: u32 = 96;
const HEIGHT: u32 = 64;
const TILE: u32 = 8;

/// Rendering parameters of a mock image.
///
/// Palette, openness and the density base `u` come from SHA-256 of
/// (prompt tokens, command, seed); `density = model_weight · (0.5 + 0.5·u)`,
/// so density grows linearly with the model weight.
#[derive(Debug, Clone, PartialEq)]
pub struct MockParams {
    pub palette: [[u8; 3]; 3],
    pub density: f64,
    pub openness: f64,
    pattern_seed: u64,
}

fn unit(bytes: &[u8]) -> f64 {
    u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as f64 / u32::MAX as f64
}

impl MockParams {
    pub fn derive(req: &GenerationRequest) -> Self {
        #[derive(Serialize)]
        struct Key<'a> {
            tokens: &'a [String],
            command: CommandLabel,
            seed: u64,
        }
        let key = serde_json::to_vec(&Key { tokens: &req.prompt_tokens, command: req.command, seed: req.seed })
            .expect("key serializes");
        let h = Sha256::digest(key);
        let palette = [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], h[8]]];
        let u = unit(&h[9..13]);
        Self {
            palette,
            density: req.model_weight.clamp(0.0, 1.0) * (0.5 + 0.5 * u),
            openness: unit(&h[13..17]),
            pattern_seed: u64::from_be_bytes(h[17..25].try_into().expect("8 bytes")),
        }
    }

    /// RGB pixels: background, a tile pattern covering `density` of the
    /// cells, and a light opening whose width follows `openness`.
    pub fn render(&self) -> Vec<u8> {
        let mut state = self.pattern_seed | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let cols = WIDTH / TILE;
        let rows = HEIGHT / TILE;
        let filled: Vec<bool> = (0..cols * rows).map(|_| next() < self.density).collect();
        let open_w = (self.openness * WIDTH as f64 * 0.6) as u32;
        let open_x0 = (WIDTH - open_w) / 2;
        let light = self.palette[2].map(|c| c / 2 + 128);
        let mut px = Vec::with_capacity((WIDTH * HEIGHT * 3) as usize);
        for y in 0..HEIGHT {
            for x in 0..WIDTH {
                let in_opening = x >= open_x0 && x < open_x0 + open_w && y >= HEIGHT / 8 && y < HEIGHT * 5 / 8;
                let color = if in_opening {
                    light
                } else if filled[((y / TILE) * cols + x / TILE) as usize] {
                    self.palette[1]
                } else {
                    self.palette[0]
                };
                px.extend_from_slice(&color);
            }
        }
        px
    }
}

pub(crate) fn encode_png(width: u32, height: u32, rgb: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory PNG header");
        writer.write_image_data(rgb).expect("in-memory PNG data");
    }
    out
}

/// A deterministic starting image for a session seeded with `seed`.
pub fn render_base_image(seed: u64) -> Vec<u8> {
    let req = GenerationRequest {
        request_id: String::new(),
        base_image: crate::types::ImageRef::for_bytes(b""),
        command: CommandLabel::IncreaseTransparency,
        model_weight: 0.5,
        prompt_tokens: vec!["base".into()],
        constraints: Default::default(),
        seed,
    };
    encode_png(WIDTH, HEIGHT, &MockParams::derive(&req).render())
}

/// Renders each request procedurally and stores the PNG.
#[derive(Debug, Clone)]
pub struct MockGenerator {
    store: ArtifactStore,
}

impl MockGenerator {
    pub fn new(store: ArtifactStore) -> Self {
        Self { store }
    }

    pub fn render(req: &GenerationRequest) -> Vec<u8> {
        encode_png(WIDTH, HEIGHT, &MockParams::derive(req).render())
    }
}

#[async_trait]
impl Generator for MockGenerator {
    async fn generate_batch(&self, requests: &[GenerationRequest]) -> Vec<GenerationResult> {
        requests
            .iter()
            .map(|req| match self.store.put(&Self::render(req)) {
                Ok(image) => GenerationResult::ok(&req.request_id, image, 0, 1),
                Err(e) => GenerationResult::failed(&req.request_id, FailureKind::Storage, e.to_string(), 0, 1),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Constraints, ImageRef};

    fn req(seed: u64, weight: f64) -> GenerationRequest {
        GenerationRequest {
            request_id: "r".into(),
            base_image: ImageRef::for_bytes(b"b"),
            command: CommandLabel::MoreLuxuriousDecoration,
            model_weight: weight,
            prompt_tokens: vec!["a".into(), "b".into()],
            constraints: Constraints::default(),
            seed,
        }
    }

    #[test]
    fn identical_requests_identical_bytes() {
        assert_eq!(MockGenerator::render(&req(1, 0.5)), MockGenerator::render(&req(1, 0.5)));
        assert_ne!(
            ImageRef::for_bytes(&MockGenerator::render(&req(1, 0.5))),
            ImageRef::for_bytes(&MockGenerator::render(&req(2, 0.5)))
        );
    }

    #[test]
    fn density_scales_with_weight() {
        let lo = MockParams::derive(&req(7, 0.0));
        let mid = MockParams::derive(&req(7, 0.5));
        let hi = MockParams::derive(&req(7, 1.0));
        assert_eq!(lo.density, 0.0);
        assert!(lo.density < mid.density && mid.density < hi.density);
        assert!((mid.density * 2.0 - hi.density).abs() < 1e-12);
        assert_eq!(lo.palette, hi.palette);
        assert_ne!(MockGenerator::render(&req(7, 0.0)), MockGenerator::render(&req(7, 1.0)));
    }

    #[test]
    fn output_is_a_png() {
        let bytes = MockGenerator::render(&req(3, 0.3));
        let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
        let reader = decoder.read_info().unwrap();
        assert_eq!((reader.info().width, reader.info().height), (WIDTH, HEIGHT));
    }
}
