use serde::{Deserialize, Serialize};

use super::camera::{project_node, CameraPose, LensModel};
use super::{MeshError, VisualMesh};
use crate::engine::NodeFeatures;

/// The visible part of a mesh for one camera pose.
///
/// Neighbour indices refer to positions in this structure. Neighbours that
/// are not visible map to [`sentinel`](Self::sentinel), one past the last
/// visible node, whose features are all zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnScreenMesh {
    pub pixel_coords: Vec<[f64; 2]>,
    pub neighbors: Vec<[usize; 6]>,
    /// Index of each visible node in the source mesh.
    pub origin_indices: Vec<usize>,
    pub resolution: [u32; 2],
}

impl OnScreenMesh {
    pub fn len(&self) -> usize {
        self.pixel_coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixel_coords.is_empty()
    }

    pub fn sentinel(&self) -> usize {
        self.pixel_coords.len()
    }
}

/// Projects every node and keeps the visible ones in ascending mesh order.
pub fn lookup_onscreen(mesh: &VisualMesh, pose: &CameraPose, lens: &LensModel) -> OnScreenMesh {
    let mut remap = vec![usize::MAX; mesh.nodes.len()];
    let mut pixel_coords = Vec::new();
    let mut origin_indices = Vec::new();
    for (index, node) in mesh.nodes.iter().enumerate() {
        if let Some(px) = project_node(node.direction, pose, lens) {
            remap[index] = pixel_coords.len();
            pixel_coords.push(px);
            origin_indices.push(index);
        }
    }

    let sentinel = pixel_coords.len();
    let neighbors = origin_indices
        .iter()
        .map(|&index| {
            mesh.nodes[index].neighbors.map(|n| match remap[n] {
                usize::MAX => sentinel,
                visible => visible,
            })
        })
        .collect();

    OnScreenMesh { pixel_coords, neighbors, origin_indices, resolution: lens.resolution }
}

/// Borrowed interleaved 8-bit image, rows top to bottom.
#[derive(Debug, Clone, Copy)]
pub struct ImageView<'a> {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: &'a [u8],
}

impl<'a> ImageView<'a> {
    pub fn new(width: usize, height: usize, channels: usize, data: &'a [u8]) -> Self {
        ImageView { width, height, channels, data }
    }

    pub fn pixel(&self, x: usize, y: usize) -> &'a [u8] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }
}

/// Nearest-pixel colour at every visible node, scaled to `[0, 1]`.
pub fn sample_image(image: &ImageView<'_>, onscreen: &OnScreenMesh) -> Result<NodeFeatures, MeshError> {
    let [w, h] = onscreen.resolution;
    let actual = [image.width, image.height, image.channels];
    if image.width != w as usize
        || image.height != h as usize
        || image.channels == 0
        || image.data.len() != image.width * image.height * image.channels
    {
        return Err(MeshError::ImageSize { expected: [w, h], actual });
    }

    let mut features = NodeFeatures::zeros(onscreen.len(), image.channels);
    for (i, px) in onscreen.pixel_coords.iter().enumerate() {
        let x = (px[0].round() as usize).min(image.width - 1);
        let y = (px[1].round() as usize).min(image.height - 1);
        for (out, &v) in features.row_mut(i).iter_mut().zip(image.pixel(x, y)) {
            *out = f32::from(v) / 255.0;
        }
    }
    Ok(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MeshGeometryConfig;
    use crate::mesh::Projection;

    fn fisheye(width: u32, height: u32) -> LensModel {
        LensModel {
            projection: Projection::Equisolid,
            focal_length: f64::from(height) / 3.0,
            center: [f64::from(width - 1) / 2.0, f64::from(height - 1) / 2.0],
            resolution: [width, height],
            fov: std::f64::consts::PI,
        }
    }

    #[test]
    fn downward_camera_sees_centre_node_at_image_centre() {
        let mesh = VisualMesh::generate(&MeshGeometryConfig::soccer_ball()).unwrap();
        let lens = fisheye(641, 481);
        let onscreen = lookup_onscreen(&mesh, &CameraPose::looking_down(1.1), &lens);
        assert_eq!(onscreen.origin_indices[0], 0);
        assert_eq!(onscreen.pixel_coords[0], [320.0, 240.0]);
    }

    #[test]
    fn full_visibility_remaps_bijectively() {
        let mesh = VisualMesh::generate(&MeshGeometryConfig::soccer_ball()).unwrap();
        let lens = fisheye(2001, 2001);
        let onscreen = lookup_onscreen(&mesh, &CameraPose::looking_down(1.1), &lens);
        assert_eq!(onscreen.len(), mesh.len());
        assert_eq!(onscreen.origin_indices, (0..mesh.len()).collect::<Vec<_>>());
        for (node, remapped) in mesh.nodes.iter().zip(&onscreen.neighbors) {
            assert_eq!(&node.neighbors, remapped);
        }
    }

    #[test]
    fn nothing_visible_is_empty() {
        let mesh = VisualMesh::generate(&MeshGeometryConfig::soccer_ball()).unwrap();
        let lens = LensModel { projection: Projection::Rectilinear, fov: 0.5, ..fisheye(64, 48) };
        // Looking straight up.
        let pose = CameraPose::from_euler(1.1, 0.0, std::f64::consts::PI, 0.0);
        let onscreen = lookup_onscreen(&mesh, &pose, &lens);
        assert!(onscreen.is_empty());
        assert_eq!(onscreen.sentinel(), 0);
    }

    #[test]
    fn constant_image_gives_constant_features() {
        let mesh = VisualMesh::generate(&MeshGeometryConfig::soccer_ball()).unwrap();
        let lens = fisheye(64, 48);
        let onscreen = lookup_onscreen(&mesh, &CameraPose::looking_down(1.1), &lens);
        let data: Vec<u8> = std::iter::repeat([51u8, 102, 255]).take(64 * 48).flatten().collect();
        let features = sample_image(&ImageView::new(64, 48, 3, &data), &onscreen).unwrap();
        for i in 0..onscreen.len() {
            assert_eq!(features.row(i), &[0.2, 0.4, 1.0]);
        }
        assert_eq!(features.row(onscreen.sentinel()), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_pixel_image() {
        let onscreen = OnScreenMesh {
            pixel_coords: vec![[0.0, 0.0]],
            neighbors: vec![[0; 6]],
            origin_indices: vec![0],
            resolution: [1, 1],
        };
        let features = sample_image(&ImageView::new(1, 1, 1, &[128]), &onscreen).unwrap();
        assert_eq!(features.row(0), &[128.0 / 255.0]);
    }

    #[test]
    fn gradient_image_is_sampled_at_rounded_coordinates() {
        let (w, h) = (97usize, 61usize);
        let data: Vec<u8> = (0..h).flat_map(|y| (0..w).flat_map(move |x| [(x * 2) as u8, (y * 4) as u8])).collect();
        let onscreen = OnScreenMesh {
            pixel_coords: vec![[10.4, 3.6], [96.0, 60.0], [0.5, 0.49]],
            neighbors: vec![[3; 6]; 3],
            origin_indices: vec![0, 1, 2],
            resolution: [w as u32, h as u32],
        };
        let features = sample_image(&ImageView::new(w, h, 2, &data), &onscreen).unwrap();
        let expect = |x: f64, y: f64| [(x.round() * 2.0) as f32 / 255.0, (y.round() * 4.0) as f32 / 255.0];
        for (i, px) in onscreen.pixel_coords.iter().enumerate() {
            assert_eq!(features.row(i), &expect(px[0], px[1]));
        }
    }

    #[test]
    fn mismatched_image_is_rejected() {
        let onscreen = OnScreenMesh { pixel_coords: vec![], neighbors: vec![], origin_indices: vec![], resolution: [4, 4] };
        let data = [0u8; 12];
        assert!(matches!(
            sample_image(&ImageView::new(2, 2, 3, &data), &onscreen),
            Err(MeshError::ImageSize { .. })
        ));
    }
}
