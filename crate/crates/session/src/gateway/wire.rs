//! WebSocket JSON messages exchanged with a generation workflow service.
//!
//! Every text frame is one object `{"v":1,"type":...,"request_id":...,"payload":{...}}`:
//!
//! - `submit` (client → server): `{"workflow_template": str, "request": GenerationRequest}`
//! - `progress` (server → client): `{"fraction": number in [0,1]}`
//! - `result` (server → client): `{"mime": str, "image_base64": str}`
//! - `error` (server → client): `{"message": str}`

use serde::{Deserialize, Serialize};

use crate::types::GenerationRequest;

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub v: u32,
    pub request_id: String,
    #[serde(flatten)]
    pub body: WireBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum WireBody {
    Submit { workflow_template: String, request: GenerationRequest },
    Progress { fraction: f64 },
    Result { mime: String, image_base64: String },
    Error { message: String },
}

impl WireMessage {
    pub fn new(request_id: &str, body: WireBody) -> Self {
        Self { v: WIRE_VERSION, request_id: request_id.into(), body }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("wire message serializes")
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let msg: WireMessage = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if msg.v != WIRE_VERSION {
            return Err(format!("unsupported wire version {}", msg.v));
        }
        Ok(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Constraints, ImageRef};
    use mentalgen_core::signal::CommandLabel;
    use proptest::prelude::*;

    fn body() -> impl Strategy<Value = WireBody> {
        prop_oneof![
            (".*", any::<u64>(), 0usize..3, any::<f64>().prop_filter("finite", |f| f.is_finite()),
             prop::collection::vec(".*", 0..6), any::<bool>(), any::<bool>(), any::<[u8; 4]>())
                .prop_map(|(t, seed, c, w, tokens, e, l, img)| WireBody::Submit {
                    workflow_template: t,
                    request: GenerationRequest {
                        request_id: "r".into(),
                        base_image: ImageRef::for_bytes(&img),
                        command: CommandLabel::ALL[c],
                        model_weight: w,
                        prompt_tokens: tokens,
                        constraints: Constraints { edge_guided: e, line_guided: l },
                        seed,
                    },
                }),
            (0.0f64..=1.0).prop_map(|fraction| WireBody::Progress { fraction }),
            (".*", ".*").prop_map(|(mime, image_base64)| WireBody::Result { mime, image_base64 }),
            ".*".prop_map(|message| WireBody::Error { message }),
        ]
    }

    proptest! {
        #[test]
        fn serialize_parse_is_identity(id in ".*", b in body()) {
            let msg = WireMessage::new(&id, b);
            prop_assert_eq!(WireMessage::parse(&msg.to_text()).unwrap(), msg);
        }
    }

    #[test]
    fn shape_and_version() {
        let text = WireMessage::new("x", WireBody::Progress { fraction: 0.5 }).to_text();
        assert_eq!(text, r#"{"v":1,"request_id":"x","type":"progress","payload":{"fraction":0.5}}"#);
        assert!(WireMessage::parse(&text.replace("\"v\":1", "\"v\":2")).is_err());
        assert!(WireMessage::parse("not json").is_err());
    }
}
