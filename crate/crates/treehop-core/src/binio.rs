//! Byte-level read helpers shared by the binary store and checkpoint
//! loaders. Reads track their absolute offset so format errors can say
//! where the file went bad.

use std::io::Read;

use crate::error::{Error, Result};

pub(crate) struct Offsets<R: Read> {
    pub(crate) inner: R,
    pub(crate) offset: u64,
}

impl<R: Read> Offsets<R> {
    pub(crate) fn new(inner: R) -> Self {
        Offsets { inner, offset: 0 }
    }

    pub(crate) fn read_exact_at(&mut self, buf: &mut [u8], path: &str, what: &str) -> Result<()> {
        let start = self.offset;
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::format(path, start, format!("unexpected end of file reading {what}"))
            } else {
                Error::Io(e)
            }
        })?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    pub(crate) fn read_u32(&mut self, path: &str, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact_at(&mut b, path, what)?;
        Ok(u32::from_le_bytes(b))
    }

    pub(crate) fn read_u64(&mut self, path: &str, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact_at(&mut b, path, what)?;
        Ok(u64::from_le_bytes(b))
    }

    pub(crate) fn read_f32(&mut self, path: &str, what: &str) -> Result<f32> {
        let mut b = [0u8; 4];
        self.read_exact_at(&mut b, path, what)?;
        Ok(f32::from_le_bytes(b))
    }

    /// Errors if any bytes remain unread.
    pub(crate) fn expect_eof(&mut self, path: &str) -> Result<()> {
        let mut probe = [0u8; 1];
        if self.inner.read(&mut probe)? != 0 {
            return Err(Error::format(path, self.offset, "trailing bytes after expected end"));
        }
        Ok(())
    }
}
