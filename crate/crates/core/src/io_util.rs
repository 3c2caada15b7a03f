use std::io::{self, Read};

use crate::error::{Error, Result};

pub(crate) fn truncated(e: io::Error, what: &str) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Truncated(what.to_string())
    } else {
        Error::Io(e)
    }
}

pub(crate) fn read_magic<R: Read>(r: &mut R, expected: [u8; 4]) -> Result<()> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found).map_err(|e| truncated(e, "magic"))?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}
