//! RIFF/WAVE decoding for integer PCM (8, 16, 24, 32 bit) and IEEE float
//! (32, 64 bit) samples, including the WAVE_FORMAT_EXTENSIBLE wrapper.
//!
//! Integer samples are scaled by 2^(bits-1), so the negative full-scale value
//! maps to exactly -1.0 and the positive one to slightly less than 1.0.
//! 8-bit data is unsigned with a 128 offset.

use crate::error::{Error, Result};
use crate::model::AudioBuffer;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

fn media(msg: impl Into<String>) -> Error {
    Error::Media(msg.into())
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

#[derive(Debug, Clone, Copy)]
struct Format {
    codec: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits: u16,
}

fn parse_fmt(body: &[u8]) -> Result<Format> {
    if body.len() < 16 {
        return Err(media(format!("fmt chunk too short ({} bytes)", body.len())));
    }
    let mut codec = u16_at(body, 0);
    if codec == FORMAT_EXTENSIBLE {
        if body.len() < 40 {
            return Err(media("extensible fmt chunk too short"));
        }
        // first two bytes of the subformat GUID carry the codec
        codec = u16_at(body, 24);
    }
    Ok(Format {
        codec,
        channels: u16_at(body, 2),
        sample_rate: u32_at(body, 4),
        block_align: u16_at(body, 12),
        bits: u16_at(body, 14),
    })
}

/// Decodes a WAV file into normalized, de-interleaved samples.
pub fn load_audio(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(media("not a RIFF/WAVE file"));
    }

    let mut format = None;
    let mut data = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let start = pos + 8;
        let available = bytes.len() - start;
        if id == b"data" {
            if size > available {
                return Err(media(format!(
                    "data chunk declares {size} bytes, only {available} present"
                )));
            }
            data.get_or_insert(&bytes[start..start + size]);
        } else if id == b"fmt " {
            if size > available {
                return Err(media("truncated fmt chunk"));
            }
            if format.is_none() {
                format = Some(parse_fmt(&bytes[start..start + size])?);
            }
        } else if size > available {
            // a trailing chunk cut short does not affect the audio
            break;
        }
        pos = start.saturating_add(size).saturating_add(size & 1);
    }

    let format = format.ok_or_else(|| media("missing fmt chunk"))?;
    let data = data.ok_or_else(|| media("missing data chunk"))?;
    decode(format, data)
}

fn decode(f: Format, data: &[u8]) -> Result<AudioBuffer> {
    if f.channels == 0 {
        return Err(media("zero channels"));
    }
    if f.sample_rate == 0 {
        return Err(media("zero sample rate"));
    }
    let width = match (f.codec, f.bits) {
        (FORMAT_PCM, 8 | 16 | 24 | 32) | (FORMAT_FLOAT, 32 | 64) => usize::from(f.bits / 8),
        (FORMAT_PCM | FORMAT_FLOAT, bits) => {
            return Err(media(format!("unsupported bit depth {bits} for codec {}", f.codec)))
        }
        (codec, _) => return Err(media(format!("unsupported codec tag {codec:#06x}"))),
    };
    let channels = usize::from(f.channels);
    let frame = width * channels;
    if usize::from(f.block_align) != frame {
        return Err(media(format!(
            "block align {} does not match {channels} channels of {} bits",
            f.block_align, f.bits
        )));
    }
    if data.len() % frame != 0 {
        return Err(media(format!(
            "data chunk of {} bytes is not a whole number of {frame}-byte frames",
            data.len()
        )));
    }

    let frames = data.len() / frame;
    let mut out = vec![Vec::with_capacity(frames); channels];
    for (i, sample) in data.chunks_exact(width).enumerate() {
        let value = match (f.codec, width) {
            (FORMAT_PCM, 1) => (f32::from(sample[0]) - 128.0) / 128.0,
            (FORMAT_PCM, 2) => f32::from(i16::from_le_bytes([sample[0], sample[1]])) / 32_768.0,
            (FORMAT_PCM, 3) => {
                let v = i32::from_le_bytes([0, sample[0], sample[1], sample[2]]) >> 8;
                v as f32 / 8_388_608.0
            }
            (FORMAT_PCM, 4) => {
                let v = i32::from_le_bytes([sample[0], sample[1], sample[2], sample[3]]);
                (f64::from(v) / 2_147_483_648.0) as f32
            }
            (_, 4) => f32::from_le_bytes([sample[0], sample[1], sample[2], sample[3]]),
            (_, 8) => {
                let mut b = [0u8; 8];
                b.copy_from_slice(sample);
                f64::from_le_bytes(b) as f32
            }
            _ => unreachable!("width checked above"),
        };
        if !(-1.0..=1.0).contains(&value) {
            return Err(media(format!(
                "float sample {value} at frame {} outside [-1, 1]",
                i / channels
            )));
        }
        out[i % channels].push(value);
    }
    AudioBuffer::new(f.sample_rate, out)
}

/// Encodes audio as 16-bit PCM WAV with a canonical 44-byte header.
pub fn encode_wav_pcm16(audio: &AudioBuffer) -> Vec<u8> {
    let channels = audio.num_channels();
    let data_len = audio.num_frames() * channels * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&(channels as u16).to_le_bytes());
    out.extend_from_slice(&audio.sample_rate().to_le_bytes());
    out.extend_from_slice(&(audio.sample_rate() * channels as u32 * 2).to_le_bytes());
    out.extend_from_slice(&(channels as u16 * 2).to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for frame in 0..audio.num_frames() {
        for ch in audio.channels() {
            let v = (ch[frame] * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}
