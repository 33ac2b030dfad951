"""Stencil dialect, access-extent analysis and loop lowering."""
