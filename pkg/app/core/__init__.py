# Core module - Contains shared components and configurations
