use image::{Rgb, RgbImage};
use visual_mesh::mesh::OnScreenMesh;

pub const NODE: Rgb<u8> = Rgb([0, 255, 0]);
pub const EDGE: Rgb<u8> = Rgb([0, 120, 255]);
pub const RED: Rgb<u8> = Rgb([255, 0, 0]);
pub const YELLOW: Rgb<u8> = Rgb([255, 255, 0]);
pub const WHITE: Rgb<u8> = Rgb([255, 255, 255]);

fn put(img: &mut RgbImage, x: i64, y: i64, colour: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, colour);
    }
}

/// 3×3 dot centred on the nearest pixel.
pub fn dot(img: &mut RgbImage, at: [f64; 2], colour: Rgb<u8>) {
    let (cx, cy) = (at[0].round() as i64, at[1].round() as i64);
    for dy in -1..=1 {
        for dx in -1..=1 {
            put(img, cx + dx, cy + dy, colour);
        }
    }
}

/// One-pixel Bresenham line.
pub fn line(img: &mut RgbImage, from: [f64; 2], to: [f64; 2], colour: Rgb<u8>) {
    let (mut x0, mut y0) = (from[0].round() as i64, from[1].round() as i64);
    let (x1, y1) = (to[0].round() as i64, to[1].round() as i64);
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let mut err = dx + dy;
    loop {
        put(img, x0, y0, colour);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// Edges between visible neighbours, then a dot per node.
pub fn mesh(img: &mut RgbImage, onscreen: &OnScreenMesh) {
    let sentinel = onscreen.sentinel();
    for (i, neighbors) in onscreen.neighbors.iter().enumerate() {
        for &n in neighbors {
            // Each undirected edge once.
            if n != sentinel && n > i {
                line(img, onscreen.pixel_coords[i], onscreen.pixel_coords[n], EDGE);
            }
        }
    }
    for &p in &onscreen.pixel_coords {
        dot(img, p, NODE);
    }
}

/// Legend colour for a confidence, if it clears the lowest threshold.
pub fn confidence_colour(p: f64) -> Option<Rgb<u8>> {
    if p > 0.9 {
        Some(WHITE)
    } else if p > 0.75 {
        Some(YELLOW)
    } else if p > 0.5 {
        Some(RED)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_hits_both_ends() {
        let mut img = RgbImage::new(10, 10);
        line(&mut img, [1.0, 8.0], [7.2, 2.9], WHITE);
        assert_eq!(*img.get_pixel(1, 8), WHITE);
        assert_eq!(*img.get_pixel(7, 3), WHITE);
        assert_eq!(img.pixels().filter(|&&p| p == WHITE).count(), 7);
    }

    #[test]
    fn dots_clip_at_borders() {
        let mut img = RgbImage::new(4, 4);
        dot(&mut img, [0.0, 0.0], RED);
        assert_eq!(img.pixels().filter(|&&p| p == RED).count(), 4);
    }

    #[test]
    fn thresholds() {
        assert_eq!(confidence_colour(0.5), None);
        assert_eq!(confidence_colour(0.6), Some(RED));
        assert_eq!(confidence_colour(0.8), Some(YELLOW));
        assert_eq!(confidence_colour(0.95), Some(WHITE));
    }
}
