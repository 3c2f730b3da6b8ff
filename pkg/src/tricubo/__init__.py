"""Connected components on triangular grids via cubulation."""
from .components import (
    CellGraph,
    ComponentSet,
    Connectivity,
    bfs_oracle_2d,
    bfs_oracle_3d,
    build_full_graph,
    is_refinement,
    label_2d,
    label_3d,
    load_components,
    save_components,
)
from .cubulation import (
    ColoringConflict,
    CoordinateConflict,
    Cubulation,
    CubulationError,
    compute_cubulation,
    load_cubulation,
    save_cubulation,
    suggest_radius,
    verify_cubulation,
)
from .fields import (
    BinaryField,
    CubicField,
    Field2D,
    FieldError,
    MultiLevelBinaryField,
    MultiLevelField,
    UncoveredCellError,
    load_field,
    random_mask,
    save_field,
    threshold_field,
    to_cubic,
    to_cubic_levels,
)
from .grid import (
    NO_NEIGHBOR,
    Finding,
    GridError,
    Report,
    TriGrid,
    cells_sharing_vertex,
    generate_hex_patch,
    hex_patch_size,
    load_grid,
    nearest_cell,
    save_grid,
    validate_grid,
)

__version__ = "0.1.0"
