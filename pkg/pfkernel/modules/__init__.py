# Modules package initialization
