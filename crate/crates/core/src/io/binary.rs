//! Little-endian binary layouts.
//!
//! Feature container:
//!
//! ```text
//! "OMICFEAT" | u32 version | u32 d | u32 n | u32 c | n × u32 label | d·n × f64 (column-major)
//! ```
//!
//! Model dump: `"OMICMODL" | u32 version | u32 source activation | u32 target
//! activation | u32 has_cap | f64 cap`, then eight matrices in
//! [`TwoStreamModel::slices`] order, each `u32 rows | u32 cols | f64 data`
//! column-major. Biases are single columns.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Activation, Classifier, Encoder, TwoStreamModel};
use crate::scatter::FeatureBlock;

pub const FEATURE_MAGIC: &[u8; 8] = b"OMICFEAT";
pub const MODEL_MAGIC: &[u8; 8] = b"OMICMODL";
pub const FORMAT_VERSION: u32 = 1;

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| fmt_err(format!("truncated while reading {what} at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn magic(&mut self, expected: &[u8; 8]) -> Result<()> {
        let got = self.take(8, "magic")?;
        if got != expected {
            return Err(fmt_err(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(expected)
            )));
        }
        let version = self.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(fmt_err(format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| fmt_err(format!("{what} {v} does not fit in 32 bits")))
}

pub fn write_features(block: &FeatureBlock) -> Result<Vec<u8>> {
    let (d, n) = (block.dim(), block.count());
    let mut out = Vec::with_capacity(24 + 4 * n + 8 * d * n);
    out.extend_from_slice(FEATURE_MAGIC);
    for v in [FORMAT_VERSION, to_u32(d, "dimension")?, to_u32(n, "count")?, to_u32(block.class_count(), "class count")?] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in block.labels() {
        out.extend_from_slice(&to_u32(l, "label")?.to_le_bytes());
    }
    for v in block.columns().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn read_features(bytes: &[u8]) -> Result<FeatureBlock> {
    let mut r = Reader::new(bytes);
    r.magic(FEATURE_MAGIC)?;
    let d = r.u32("dimension")? as usize;
    let n = r.u32("count")? as usize;
    let c = r.u32("class count")? as usize;
    let expected = (d as u128) * (n as u128) * 8 + (n as u128) * 4 + 24;
    if bytes.len() as u128 != expected {
        return Err(fmt_err(format!(
            "length {} does not match header (d={d}, n={n}) which implies {expected} bytes",
            bytes.len()
        )));
    }
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let l = r.u32("label")? as usize;
        if l >= c {
            return Err(fmt_err(format!("label {l} of column {i} is not below class count {c}")));
        }
        labels.push(l);
    }
    let mut data = Vec::with_capacity(d * n);
    for _ in 0..d * n {
        data.push(r.f64("data")?);
    }
    FeatureBlock::new(DMatrix::from_vec(d, n, data), labels, c)
}

fn put_matrix(out: &mut Vec<u8>, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    out.extend_from_slice(&to_u32(rows, "rows")?.to_le_bytes());
    out.extend_from_slice(&to_u32(cols, "cols")?.to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

fn get_matrix(r: &mut Reader<'_>, what: &str) -> Result<DMatrix<f64>> {
    let rows = r.u32(what)? as usize;
    let cols = r.u32(what)? as usize;
    let len = rows
        .checked_mul(cols)
        .filter(|&l| l <= r.remaining() / 8)
        .ok_or_else(|| fmt_err(format!("{what}: {rows}×{cols} exceeds the remaining bytes")))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        data.push(r.f64(what)?);
    }
    Ok(DMatrix::from_vec(rows, cols, data))
}

fn get_vector(r: &mut Reader<'_>, what: &str) -> Result<DVector<f64>> {
    let m = get_matrix(r, what)?;
    if m.ncols() != 1 {
        return Err(fmt_err(format!("{what} must be a single column, got {} columns", m.ncols())));
    }
    Ok(m.column(0).into_owned())
}

pub fn write_model(model: &TwoStreamModel) -> Result<Vec<u8>> {
    model.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    for v in [
        FORMAT_VERSION,
        model.source_encoder.activation.code(),
        model.target_encoder.activation.code(),
        model.norm_cap.is_some() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&model.norm_cap.unwrap_or(0.0).to_le_bytes());
    for enc in [&model.source_encoder, &model.target_encoder] {
        put_matrix(&mut out, enc.weights.nrows(), enc.weights.ncols(), enc.weights.as_slice())?;
        put_matrix(&mut out, enc.bias.len(), 1, enc.bias.as_slice())?;
    }
    for cls in [&model.source_classifier, &model.target_classifier] {
        put_matrix(&mut out, cls.weights.nrows(), cls.weights.ncols(), cls.weights.as_slice())?;
        put_matrix(&mut out, cls.bias.len(), 1, cls.bias.as_slice())?;
    }
    Ok(out)
}

pub fn read_model(bytes: &[u8]) -> Result<TwoStreamModel> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    let act_s = Activation::from_code(r.u32("activation")?)?;
    let act_t = Activation::from_code(r.u32("activation")?)?;
    let has_cap = r.u32("cap flag")?;
    let cap = r.f64("cap")?;
    let norm_cap = match has_cap {
        0 => None,
        1 if cap > 0.0 && cap.is_finite() => Some(cap),
        1 => return Err(fmt_err(format!("norm cap must be positive, got {cap}"))),
        other => return Err(fmt_err(format!("cap flag must be 0 or 1, got {other}"))),
    };
    let mut encoder = |act| -> Result<Encoder> {
        Ok(Encoder {
            weights: get_matrix(&mut r, "encoder weights")?,
            bias: get_vector(&mut r, "encoder bias")?,
            activation: act,
        })
    };
    let source_encoder = encoder(act_s)?;
    let target_encoder = encoder(act_t)?;
    let mut classifier = || -> Result<Classifier> {
        Ok(Classifier {
            weights: get_matrix(&mut r, "classifier weights")?,
            bias: get_vector(&mut r, "classifier bias")?,
        })
    };
    let source_classifier = classifier()?;
    let target_classifier = classifier()?;
    if r.remaining() != 0 {
        return Err(fmt_err(format!("{} trailing bytes", r.remaining())));
    }
    let model = TwoStreamModel {
        source_encoder,
        target_encoder,
        source_classifier,
        target_classifier,
        norm_cap,
    };
    model.validate()?;
    if !model.is_finite() {
        return Err(Error::NonFinite("model parameters".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block() -> FeatureBlock {
        let cols = DMatrix::from_column_slice(2, 3, &[1.5, -0.0, f64::MIN_POSITIVE, 3.0, 1e300, -7.25]);
        FeatureBlock::new(cols, vec![2, 0, 1], 3).unwrap()
    }

    #[test]
    fn features_round_trip_bit_exact() {
        let b = block();
        let bytes = write_features(&b).unwrap();
        assert_eq!(bytes.len(), 8 + 16 + 4 * 3 + 8 * 6);
        let back = read_features(&bytes).unwrap();
        assert_eq!(back.labels(), b.labels());
        let bits = |m: &FeatureBlock| m.columns().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&b));
    }

    #[test]
    fn feature_header_layout() {
        let bytes = write_features(&block()).unwrap();
        assert_eq!(&bytes[..8], b"OMICFEAT");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &3u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &3u32.to_le_bytes());
    }

    #[test]
    fn feature_errors() {
        let good = write_features(&block()).unwrap();
        assert!(matches!(read_features(&good[..good.len() - 1]), Err(Error::Format(_))));
        let mut longer = good.clone();
        longer.push(0);
        assert!(matches!(read_features(&longer), Err(Error::Format(_))));
        let mut magic = good.clone();
        magic[0] = b'X';
        assert!(matches!(read_features(&magic), Err(Error::Format(_))));
        let mut version = good.clone();
        version[8] = 2;
        assert!(matches!(read_features(&version), Err(Error::Format(_))));
        let mut label = good.clone();
        label[24] = 3;
        assert!(matches!(read_features(&label), Err(Error::Format(_))));
        // Header claiming a huge payload must fail on length, not allocate.
        let mut huge = good[..24].to_vec();
        huge[12..16].copy_from_slice(&u32::MAX.to_le_bytes());
        huge[16..20].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(read_features(&huge), Err(Error::Format(_))));
    }

    #[test]
    fn model_round_trip() {
        let mut m = TwoStreamModel::init(5, 3, 4, 2, Activation::Tanh);
        m.target_encoder.activation = Activation::Linear;
        m.target_classifier.bias[1] = -0.125;
        m.norm_cap = Some(2.5);
        let bytes = write_model(&m).unwrap();
        assert_eq!(&bytes[..8], b"OMICMODL");
        assert_eq!(read_model(&bytes).unwrap(), m);
        m.norm_cap = None;
        assert_eq!(read_model(&write_model(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn model_errors() {
        let m = TwoStreamModel::init(5, 3, 4, 2, Activation::Tanh);
        let bytes = write_model(&m).unwrap();
        assert!(read_model(&bytes[..bytes.len() - 8]).is_err());
        let mut extra = bytes.clone();
        extra.extend_from_slice(&[0; 8]);
        assert!(read_model(&extra).is_err());
        let mut act = bytes.clone();
        act[12] = 9;
        assert!(read_model(&act).is_err());
    }
}
