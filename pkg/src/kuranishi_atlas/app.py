from fastapi import FastAPI
from kuranishi_atlas.routers import atlas_router

app = FastAPI(debug=True)

# Include the atlas router under the '/api/atlas' prefix
app.include_router(atlas_router.router, prefix="/api/atlas")
