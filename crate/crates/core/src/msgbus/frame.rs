use super::envelope::Envelope;

/// Largest accepted JSON body, in bytes.
pub const MAX_FRAME_BODY: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame body of {size} bytes exceeds the {MAX_FRAME_BODY}-byte limit")]
    FrameTooLarge { size: usize },
    #[error("incomplete frame: {needed} more bytes needed")]
    Incomplete { needed: usize },
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
}

/// Length-prefixes the canonical JSON of `env`.
pub fn encode_frame(env: &Envelope) -> Result<Vec<u8>, FrameError> {
    let body = env.to_canonical_json();
    if body.len() > MAX_FRAME_BODY {
        return Err(FrameError::FrameTooLarge { size: body.len() });
    }
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body.as_bytes());
    Ok(out)
}

/// Decodes the frame at the start of `buf`, returning the envelope and the
/// number of bytes consumed. Trailing bytes belong to later frames.
pub fn decode_frame(buf: &[u8]) -> Result<(Envelope, usize), FrameError> {
    if buf.len() < 4 {
        return Err(FrameError::Incomplete {
            needed: 4 - buf.len(),
        });
    }
    let len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
    if len > MAX_FRAME_BODY {
        return Err(FrameError::MalformedFrame(format!(
            "declared length {len} exceeds the frame limit"
        )));
    }
    let total = 4 + len;
    if buf.len() < total {
        return Err(FrameError::Incomplete {
            needed: total - buf.len(),
        });
    }
    let body = std::str::from_utf8(&buf[4..total])
        .map_err(|e| FrameError::MalformedFrame(format!("body is not UTF-8: {e}")))?;
    let env = Envelope::from_json(body).map_err(FrameError::MalformedFrame)?;
    Ok((env, total))
}

/// Reassembles frames from a byte stream delivered in arbitrary chunks.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Next complete frame, `Ok(None)` if more bytes are needed. A malformed
    /// frame is consumed before the error is returned so the stream can
    /// continue.
    pub fn next_frame(&mut self) -> Result<Option<Envelope>, FrameError> {
        match decode_frame(&self.buf) {
            Ok((env, used)) => {
                self.buf.drain(..used);
                Ok(Some(env))
            }
            Err(FrameError::Incomplete { .. }) => Ok(None),
            Err(e) => {
                let skip = if self.buf.len() >= 4 {
                    let len = u32::from_be_bytes([self.buf[0], self.buf[1], self.buf[2], self.buf[3]]) as usize;
                    (4 + len).min(self.buf.len())
                } else {
                    self.buf.len()
                };
                self.buf.drain(..skip);
                Err(e)
            }
        }
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }
}
