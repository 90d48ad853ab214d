use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::{EpisodeConfig, EvaderAction, Observation, PursuerAction};
use crate::world::Team;

pub const PROTOCOL_VERSION: u32 = 1;

/// Longest accepted frame, excluding the line feed.
pub const MAX_FRAME_BYTES: usize = 1 << 20;

/// One frame of the wire protocol: a JSON object on its own line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        role: Team,
        protocol_version: u32,
    },
    Config(EpisodeConfig),
    Obs {
        episode: u64,
        step: u64,
        #[serde(flatten)]
        observation: Observation,
    },
    Act {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<i64>,
    },
    Result {
        reward: i64,
        done: bool,
        score: u64,
    },
    EpisodeEnd {
        score: u64,
        kills: u64,
        duration: f64,
    },
    Error {
        code: ErrorCode,
        detail: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    SlotTaken,
    VersionMismatch,
    Timeout,
    BadAction,
    /// The line was not a decodable frame.
    BadFrame,
    /// A well-formed frame arrived where another kind was expected.
    UnexpectedMessage,
    HandshakeTimeout,
}

impl Message {
    pub fn hello(role: Team) -> Self {
        Message::Hello { role, protocol_version: PROTOCOL_VERSION }
    }

    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        Message::Error { code, detail: detail.into() }
    }

    fn act(name: &str, coords: Option<(u32, u32)>) -> Self {
        Message::Act {
            name: name.to_owned(),
            x: coords.map(|c| i64::from(c.0)),
            y: coords.map(|c| i64::from(c.1)),
        }
    }

    pub fn pursuer_act(action: &PursuerAction) -> Self {
        Self::act(action.name(), action.coords())
    }

    pub fn evader_act(action: &EvaderAction) -> Self {
        Self::act(action.name(), action.coords())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("frame of {len} bytes exceeds the {MAX_FRAME_BYTES}-byte limit")]
    TooLong { len: usize },
    #[error("malformed frame at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
}

/// Serializes `message` as one LF-terminated line.
pub fn encode(message: &Message) -> Vec<u8> {
    let mut line = serde_json::to_vec(message).expect("messages always serialize");
    line.push(b'\n');
    line
}

/// Parses one frame; a trailing LF (or CRLF) is optional.
pub fn decode(line: &[u8]) -> Result<Message, DecodeError> {
    let body = line.strip_suffix(b"\n").unwrap_or(line);
    let body = body.strip_suffix(b"\r").unwrap_or(body);
    if body.len() > MAX_FRAME_BYTES {
        return Err(DecodeError::TooLong { len: body.len() });
    }
    serde_json::from_slice(body).map_err(|e| DecodeError::Malformed {
        offset: byte_offset(body, e.line(), e.column()),
        reason: e.to_string(),
    })
}

fn byte_offset(body: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = body.split(|b| *b == b'\n').take(line - 1).map(|l| l.len() + 1).sum();
    (line_start + column.saturating_sub(1)).min(body.len())
}

/// Reads the next frame. `Ok(None)` at end of stream; oversized lines are
/// consumed whole and reported without buffering them.
pub fn read_frame<R: BufRead>(reader: &mut R) -> std::io::Result<Option<Result<Message, DecodeError>>> {
    let mut line = Vec::new();
    let mut overflow = 0usize;
    loop {
        let chunk = reader.fill_buf()?;
        if chunk.is_empty() {
            if line.is_empty() && overflow == 0 {
                return Ok(None);
            }
            break;
        }
        let (take, found) = match chunk.iter().position(|b| *b == b'\n') {
            Some(i) => (i + 1, true),
            None => (chunk.len(), false),
        };
        if overflow > 0 || line.len() + take > MAX_FRAME_BYTES + 2 {
            overflow += line.len() + take;
            line.clear();
        } else {
            line.extend_from_slice(&chunk[..take]);
        }
        reader.consume(take);
        if found {
            break;
        }
    }
    if overflow > 0 {
        return Ok(Some(Err(DecodeError::TooLong { len: overflow })));
    }
    Ok(Some(decode(&line)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_op_act_has_a_canonical_form() {
        let m = Message::pursuer_act(&PursuerAction::NoOp);
        assert_eq!(encode(&m), b"{\"type\":\"act\",\"name\":\"no_op\"}\n");
        let m = Message::evader_act(&EvaderAction::MoveMinimap { x: 3, y: 31 });
        assert_eq!(encode(&m), b"{\"type\":\"act\",\"name\":\"move_minimap\",\"x\":3,\"y\":31}\n");
    }

    #[test]
    fn config_and_hello_round_trip() {
        for m in [
            Message::hello(Team::Evader),
            Message::Config(EpisodeConfig::default()),
            Message::error(ErrorCode::SlotTaken, "pursuer slot already bound"),
            Message::EpisodeEnd { score: 12, kills: 12, duration: 180.0 },
        ] {
            assert_eq!(decode(&encode(&m)).unwrap(), m);
        }
        let hello = String::from_utf8(encode(&Message::hello(Team::Pursuer))).unwrap();
        assert_eq!(hello, "{\"type\":\"hello\",\"role\":\"pursuer\",\"protocol_version\":1}\n");
    }

    #[test]
    fn malformed_frames_report_an_offset() {
        match decode(b"{\"type\":\"act\",\"name\"") {
            Err(DecodeError::Malformed { offset, .. }) => assert!((14..=20).contains(&offset), "{offset}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(decode(b"{\"type\":\"warp\"}\n"), Err(DecodeError::Malformed { .. })));
        assert!(matches!(decode(b"not json"), Err(DecodeError::Malformed { offset, .. }) if offset < 3));
    }

    #[test]
    fn oversized_lines_are_rejected_and_skipped() {
        let mut input = vec![b' '; MAX_FRAME_BYTES + 10];
        input.push(b'\n');
        input.extend_from_slice(&encode(&Message::pursuer_act(&PursuerAction::SelectArmy)));
        let mut reader = std::io::BufReader::with_capacity(4096, &input[..]);
        assert!(matches!(read_frame(&mut reader).unwrap(), Some(Err(DecodeError::TooLong { .. }))));
        assert_eq!(
            read_frame(&mut reader).unwrap().unwrap().unwrap(),
            Message::pursuer_act(&PursuerAction::SelectArmy)
        );
        assert!(read_frame(&mut reader).unwrap().is_none());

        assert!(matches!(decode(&vec![b' '; MAX_FRAME_BYTES + 1]), Err(DecodeError::TooLong { .. })));
    }

    #[test]
    fn truncated_final_line_is_a_decode_error() {
        let mut reader = &b"{\"type\":\"result\",\"reward\":1"[..];
        assert!(matches!(read_frame(&mut reader).unwrap(), Some(Err(DecodeError::Malformed { .. }))));
    }
}
