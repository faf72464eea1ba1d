"""On-disk formats: tensor files, checkpoints, sinogram bundles and images."""
