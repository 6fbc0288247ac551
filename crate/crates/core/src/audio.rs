//! WAV I/O: RIFF PCM, 16-bit, mono, 16 kHz everywhere.

use std::path::Path;

use crate::dsp::SAMPLE_RATE;
use crate::error::Error;
use crate::Result;

pub fn write_wav(path: &Path, samples: &[f32]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}

pub fn read_wav(path: &Path) -> Result<Vec<f32>> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.sample_rate != SAMPLE_RATE {
        return Err(Error::Other(format!(
            "{}: expected mono {SAMPLE_RATE} Hz, got {} ch {} Hz",
            path.display(),
            spec.channels,
            spec.sample_rate
        )));
    }
    match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => Ok(reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32767.0))
            .collect::<std::result::Result<_, _>>()?),
        (hound::SampleFormat::Float, 32) => Ok(reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()?),
        (fmt, bits) => Err(Error::Other(format!(
            "{}: unsupported wav format {fmt:?}/{bits}",
            path.display()
        ))),
    }
}
