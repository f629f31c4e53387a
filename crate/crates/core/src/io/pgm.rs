use crate::error::{Error, Result};
use crate::mask::GrayImage;

struct Header {
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn skip_space_and_comments(bytes: &[u8], mut i: usize) -> usize {
    loop {
        match bytes.get(i) {
            Some(b) if b.is_ascii_whitespace() => i += 1,
            Some(b'#') => {
                while bytes.get(i).is_some_and(|&b| b != b'\n' && b != b'\r') {
                    i += 1;
                }
            }
            _ => return i,
        }
    }
}

fn header_number(bytes: &[u8], i: &mut usize, what: &str) -> Result<u32> {
    *i = skip_space_and_comments(bytes, *i);
    let start = *i;
    while bytes.get(*i).is_some_and(u8::is_ascii_digit) {
        *i += 1;
    }
    if start == *i {
        return Err(Error::CorruptImage(format!("missing {what} in PGM header")));
    }
    std::str::from_utf8(&bytes[start..*i])
        .unwrap()
        .parse()
        .map_err(|_| Error::CorruptImage(format!("{what} out of range in PGM header")))
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if !bytes.starts_with(b"P5") {
        let magic = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(Error::UnsupportedFormat(format!("expected binary PGM magic P5, got `{magic}`")));
    }
    let mut i = 2;
    let width = header_number(bytes, &mut i, "width")? as usize;
    let height = header_number(bytes, &mut i, "height")? as usize;
    let maxval = header_number(bytes, &mut i, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!("maxval {maxval}; only 8-bit PGM is supported")));
    }
    if width == 0 || height == 0 {
        return Err(Error::CorruptImage(format!("empty {width}x{height} image")));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(i).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::CorruptImage("missing separator after PGM header".into()));
    }
    Ok(Header { width, height, maxval, data_start: i + 1 })
}

/// Width and height from the header alone.
pub fn read_pgm_extent(bytes: &[u8]) -> Result<(usize, usize)> {
    let h = parse_header(bytes)?;
    Ok((h.width, h.height))
}

/// Binary (P5) graymap with maxval at most 255. Other maxvals are rescaled
/// to `0..=255` with rounding.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let h = parse_header(bytes)?;
    let n = h.width * h.height;
    let data = bytes
        .get(h.data_start..h.data_start + n)
        .ok_or_else(|| Error::CorruptImage(format!("expected {n} pixel bytes, got {}", bytes.len().saturating_sub(h.data_start))))?;
    let pixels = if h.maxval == 255 {
        data.to_vec()
    } else {
        data.iter()
            .map(|&v| {
                if u32::from(v) > h.maxval {
                    return Err(Error::CorruptImage(format!("pixel value {v} exceeds maxval {}", h.maxval)));
                }
                Ok(((u32::from(v) * 255 + h.maxval / 2) / h.maxval) as u8)
            })
            .collect::<Result<Vec<u8>>>()?
    };
    GrayImage::new(h.width, h.height, pixels)
}

/// `P5\n<w> <h>\n255\n` followed by the raster.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_black_pixel() {
        let img = read_pgm(b"P5 1 1 255 \x00").unwrap();
        assert_eq!((img.width(), img.height(), img.pixels()), (1, 1, &[0u8][..]));
    }

    #[test]
    fn ascii_rejected() {
        assert!(matches!(read_pgm(b"P2\n1 1\n255\n0\n"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(read_pgm(b"P5\n2 2\n65535\n"), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn truncated() {
        assert!(matches!(read_pgm(b"P5\n2 2\n255\n\x01\x02"), Err(Error::CorruptImage(_))));
        assert!(matches!(read_pgm(b"P5\n2"), Err(Error::CorruptImage(_))));
    }

    #[test]
    fn comments_and_round_trip() {
        let img = read_pgm(b"P5\n# made by hand\n3 # width\n1\n255\n\x01\x80\xff").unwrap();
        assert_eq!(img.pixels(), &[1, 128, 255]);
        let bytes = write_pgm(&img);
        assert_eq!(write_pgm(&read_pgm(&bytes).unwrap()), bytes);
        assert_eq!(read_pgm_extent(&bytes).unwrap(), (3, 1));
    }

    #[test]
    fn low_maxval_rescaled() {
        let img = read_pgm(b"P5 2 1 1\n\x00\x01").unwrap();
        assert_eq!(img.pixels(), &[0, 255]);
        assert!(read_pgm(b"P5 1 1 1\n\x02").is_err());
    }
}
