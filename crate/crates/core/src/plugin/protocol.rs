//! Newline-delimited JSON messages exchanged with trainer plugins over the
//! child's stdin/stdout. Every message is one object with a `type` field;
//! unrecognised fields are ignored.

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize};

use crate::space::ParamValue;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        version: u32,
        algorithms: Vec<String>,
    },
    HelloAck {
        version: u32,
    },
    Train {
        config_id: usize,
        algorithm: String,
        params: IndexMap<String, ParamValue>,
        data_ref: String,
    },
    Trained {
        config_id: usize,
        #[serde(deserialize_with = "string_or_number")]
        model_id: String,
        train_seconds: f64,
    },
    Predict {
        model_id: String,
        data_ref: String,
    },
    Scores {
        #[serde(deserialize_with = "string_or_number")]
        model_id: String,
        values: Vec<f64>,
    },
    Error {
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config_id: Option<usize>,
    },
    Shutdown,
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::HelloAck { .. } => "hello_ack",
            Message::Train { .. } => "train",
            Message::Trained { .. } => "trained",
            Message::Predict { .. } => "predict",
            Message::Scores { .. } => "scores",
            Message::Error { .. } => "error",
            Message::Shutdown => "shutdown",
        }
    }

    /// One line of wire text, including the trailing `\n`. JSON string
    /// escaping guarantees no embedded newline.
    pub fn encode(&self) -> String {
        let mut line = serde_json::to_string(self).expect("messages always serialize");
        line.push('\n');
        line
    }

    pub fn decode(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n']))
    }
}

fn string_or_number<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        S(String),
        N(serde_json::Number),
    }
    Ok(match Id::deserialize(d)? {
        Id::S(s) => s,
        Id::N(n) => n.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shapes() {
        let train = Message::Train {
            config_id: 3,
            algorithm: "logistic_regression".into(),
            params: [("c".to_string(), ParamValue::Real(0.5)), ("n".to_string(), ParamValue::Int(10))]
                .into_iter()
                .collect(),
            data_ref: "/tmp/x.csv".into(),
        };
        assert_eq!(
            train.encode(),
            "{\"type\":\"train\",\"config_id\":3,\"algorithm\":\"logistic_regression\",\"params\":{\"c\":0.5,\"n\":10},\"data_ref\":\"/tmp/x.csv\"}\n"
        );
        assert_eq!(Message::Shutdown.encode(), "{\"type\":\"shutdown\"}\n");
        assert_eq!(Message::HelloAck { version: 1 }.encode(), "{\"type\":\"hello_ack\",\"version\":1}\n");
        assert_eq!(
            Message::Error { message: "a\nb".into(), config_id: None }.encode(),
            "{\"type\":\"error\",\"message\":\"a\\nb\"}\n"
        );
        assert_eq!(
            Message::Predict { model_id: "m1".into(), data_ref: "d".into() }.encode(),
            "{\"type\":\"predict\",\"model_id\":\"m1\",\"data_ref\":\"d\"}\n"
        );
    }

    #[test]
    fn decoding_is_lenient() {
        let m = Message::decode("{\"type\":\"hello\",\"version\":1,\"algorithms\":[\"lr\"],\"vendor\":\"x\"}\r\n").unwrap();
        assert_eq!(m, Message::Hello { version: 1, algorithms: vec!["lr".into()] });
        let m = Message::decode("{\"model_id\":7,\"type\":\"trained\",\"config_id\":0,\"train_seconds\":0.25}").unwrap();
        assert_eq!(m, Message::Trained { config_id: 0, model_id: "7".into(), train_seconds: 0.25 });
        let m = Message::decode("{\"type\":\"error\",\"message\":\"bad\",\"config_id\":4}").unwrap();
        assert_eq!(m.kind(), "error");
        assert!(Message::decode("{\"type\":\"bogus\"}").is_err());
        assert!(Message::decode("not json").is_err());
    }
}
