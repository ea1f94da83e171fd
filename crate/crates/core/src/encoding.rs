//! Canonical binary encoding used for every signed or hashed byte string.
//!
//! An object is a one-byte [`Tag`] followed by its fields in declaration
//! order. Every field is a 4-byte big-endian length followed by that many
//! bytes. Integers are 8-byte big-endian field bodies, floats their IEEE-754
//! bit pattern, nested objects their own full encoding, lists a 4-byte count
//! followed by one field per element, and optional values a field holding
//! either `0x00` or `0x01 || value`.
//!
//! The tag plus length-prefixing makes the encoding injective across types.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unexpected end of input")]
    Truncated,
    #[error("expected tag {expected:#04x}, found {found:#04x}")]
    WrongTag { expected: u8, found: u8 },
    #[error("trailing bytes after object")]
    Trailing,
    #[error("invalid field: {0}")]
    Invalid(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Tag {
    Statement = 0x01,
    PrivateStatement = 0x02,
    Proof = 0x03,
    EndorsementStatement = 0x04,
    Endorsement = 0x05,
    EndorsedProof = 0x06,
    HashChainLink = 0x07,
    BloomAccumulator = 0x08,
    ProvenanceEntry = 0x09,
    CommitmentOpening = 0x10,
    LinkPayload = 0x11,
    TimestampToken = 0x12,
    AccumulatorPayload = 0x13,
    EpochReport = 0x14,
    Presentation = 0x15,
}

pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(tag: Tag) -> Self {
        Encoder { buf: vec![tag as u8] }
    }

    pub fn bytes(&mut self, bytes: &[u8]) -> &mut Self {
        let len = u32::try_from(bytes.len()).expect("field longer than u32::MAX");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.bytes(&v.to_be_bytes())
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.u64(v.to_bits())
    }

    pub fn opt_bytes(&mut self, v: Option<&[u8]>) -> &mut Self {
        match v {
            None => self.bytes(&[0]),
            Some(b) => {
                let mut body = Vec::with_capacity(b.len() + 1);
                body.push(1);
                body.extend_from_slice(b);
                self.bytes(&body)
            }
        }
    }

    pub fn nested<T: Canonical>(&mut self, v: &T) -> &mut Self {
        self.bytes(&v.encode())
    }

    pub fn list<I, F>(&mut self, items: I, mut each: F) -> &mut Self
    where
        I: ExactSizeIterator,
        F: FnMut(I::Item) -> Vec<u8>,
    {
        let mut body = (items.len() as u32).to_be_bytes().to_vec();
        for item in items {
            let elem = each(item);
            body.extend_from_slice(&(elem.len() as u32).to_be_bytes());
            body.extend_from_slice(&elem);
        }
        self.bytes(&body)
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8], tag: Tag) -> Result<Self, DecodeError> {
        let found = *buf.first().ok_or(DecodeError::Truncated)?;
        if found != tag as u8 {
            return Err(DecodeError::WrongTag { expected: tag as u8, found });
        }
        Ok(Decoder { buf, pos: 1 })
    }

    /// Decoder over a bare field sequence with no leading tag (list bodies).
    fn untagged(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).ok_or(DecodeError::Truncated)?;
        let out = self.buf.get(self.pos..end).ok_or(DecodeError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn u32_raw(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = self.u32_raw()? as usize;
        self.take(len)
    }

    pub fn string(&mut self) -> Result<String, DecodeError> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| DecodeError::Invalid("utf-8"))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        let b: [u8; 8] = self.bytes()?.try_into().map_err(|_| DecodeError::Invalid("u64 width"))?;
        Ok(u64::from_be_bytes(b))
    }

    pub fn f64(&mut self) -> Result<f64, DecodeError> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn opt_bytes(&mut self) -> Result<Option<&'a [u8]>, DecodeError> {
        let body = self.bytes()?;
        match body.split_first() {
            Some((0, [])) => Ok(None),
            Some((1, rest)) => Ok(Some(rest)),
            _ => Err(DecodeError::Invalid("option marker")),
        }
    }

    pub fn nested<T: Canonical>(&mut self) -> Result<T, DecodeError> {
        T::decode(self.bytes()?)
    }

    pub fn list<T, F>(&mut self, mut each: F) -> Result<Vec<T>, DecodeError>
    where
        F: FnMut(&'a [u8]) -> Result<T, DecodeError>,
    {
        let body = self.bytes()?;
        let mut inner = Decoder::untagged(body);
        let count = inner.u32_raw()? as usize;
        // Each element costs at least its 4-byte length prefix.
        if count > body.len() / 4 {
            return Err(DecodeError::Truncated);
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(each(inner.bytes()?)?);
        }
        inner.finish()?;
        Ok(out)
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(DecodeError::Trailing)
        }
    }
}

/// Objects with a canonical byte encoding.
pub trait Canonical: Sized {
    fn encode(&self) -> Vec<u8>;
    fn decode(bytes: &[u8]) -> Result<Self, DecodeError>;
}
