# SlideKit - Analysis of experiments with sliding levels
# Built with numpy, scipy, pandas and pydantic
